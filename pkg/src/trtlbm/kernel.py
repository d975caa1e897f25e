"""Collide-and-stream TRT kernel on a periodic Cartesian grid."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .scheme import FluxModel, RelaxPair, SchemeSpec, equilibrium, link_parts

SUBSAMPLES = 64


class NonFiniteError(FloatingPointError):
    """Raised when the lattice state stops being finite."""

    def __init__(self, step: int, report=None):
        super().__init__(f"non-finite distribution values after step {step}")
        self.step = step
        self.report = report


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``n`` cells per dimension."""

    d: int
    n: int
    domain: tuple[tuple[float, float], ...]
    lam: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two cells per dimension")
        dom = tuple((float(a), float(b)) for a, b in self.domain)
        if len(dom) != self.d:
            raise ValueError(f"domain has {len(dom)} intervals for d={self.d}")
        if any(b <= a for a, b in dom):
            raise ValueError("empty domain interval")
        object.__setattr__(self, "domain", dom)
        widths = [(b - a) / self.n for a, b in dom]
        if max(widths) - min(widths) > 1e-14 * max(widths):
            raise ValueError("space step must be the same in every dimension")

    @classmethod
    def uniform(cls, d: int, n: int, lam: float, low: float = -1.0, high: float = 1.0) -> "GridSpec":
        return cls(d, n, ((low, high),) * d, lam)

    @property
    def dx(self) -> float:
        a, b = self.domain[0]
        return (b - a) / self.n

    @property
    def dt(self) -> float:
        return self.dx / self.lam

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.d

    def centers(self) -> list[np.ndarray]:
        return [a + (np.arange(self.n) + 0.5) * self.dx for a, _ in self.domain]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.centers(), indexing="ij")

    def steps_to(self, T: float) -> int:
        """Number of full steps needed to reach ``T`` (no fractional last step)."""
        if T < 0:
            raise ValueError("final time must be non-negative")
        return math.ceil(T / self.dt * (1.0 - 1e-12))

    def check_shifts(self, spec: SchemeSpec) -> np.ndarray:
        if spec.d != self.d:
            raise ValueError(f"scheme dimension {spec.d} does not match grid dimension {self.d}")
        if not math.isclose(spec.lam, self.lam, rel_tol=1e-14):
            raise ValueError("grid and scheme disagree on the lattice velocity")
        return spec.shifts()

    def refined(self, r: int) -> "GridSpec":
        return GridSpec(self.d, self.n * r, self.domain, self.lam)


@dataclass
class InitialDatum:
    """Bounded initial condition.

    ``pointwise`` takes one coordinate array per dimension.  When given,
    ``cell_average`` maps a :class:`GridSpec` to the exact cell averages.
    """

    pointwise: Callable[..., np.ndarray]
    m: float
    cell_average: Callable[[GridSpec], np.ndarray] | None = None
    tv_hint: float | None = None
    name: str = "custom"

    def __call__(self, *coords) -> np.ndarray:
        return np.asarray(self.pointwise(*coords), dtype=float)

    def check_bound(self, grid: GridSpec, tol: float = 1e-12) -> None:
        values = self(*grid.mesh())
        worst = float(np.max(np.abs(values)))
        if worst > self.m + tol:
            raise ValueError(f"datum {self.name!r} reaches {worst!r}, above its bound m={self.m!r}")


def cell_averages(datum: InitialDatum, grid: GridSpec, subsamples: int = SUBSAMPLES) -> np.ndarray:
    """Cell averages of the datum, clamped to ``[-m, m]``.

    Uses the exact average when the datum provides one, composite midpoint
    quadrature with ``subsamples`` points per cell and dimension otherwise.
    """
    if datum.cell_average is not None:
        avg = np.asarray(datum.cell_average(grid), dtype=float)
        return np.clip(avg, -datum.m, datum.m)
    s = subsamples
    offsets = (np.arange(s) + 0.5) / s * grid.dx
    starts = [a + np.arange(grid.n) * grid.dx for a, _ in grid.domain]
    total = np.zeros(grid.shape)
    # vectorise over the last dimension's subsamples, loop over the others
    last = (starts[-1][:, None] + offsets[None, :]).ravel()
    for combo in itertools.product(range(s), repeat=grid.d - 1):
        coords = [starts[a] + offsets[i] for a, i in enumerate(combo)] + [last]
        mesh = np.meshgrid(*coords, indexing="ij")
        vals = datum(*mesh).reshape(grid.shape + (s,))
        total += vals.sum(axis=-1)
    avg = total / s ** grid.d
    return np.clip(avg, -datum.m, datum.m)


@dataclass
class LatticeState:
    """Distribution functions ``f[k, ...]`` with a spare buffer for streaming."""

    f: np.ndarray
    step: int = 0
    back: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.f = np.ascontiguousarray(self.f, dtype=float)
        if self.back is None or self.back.shape != self.f.shape:
            self.back = np.empty_like(self.f)

    @property
    def q(self) -> int:
        return self.f.shape[0]

    def moment(self) -> np.ndarray:
        return self.f.sum(axis=0)

    def copy(self) -> "LatticeState":
        return LatticeState(self.f.copy(), self.step)

    def is_finite(self) -> bool:
        return bool(np.isfinite(np.max(np.abs(self.f))))


def init_at_equilibrium(spec: SchemeSpec, flux: FluxModel, datum: InitialDatum, grid: GridSpec,
                        averages: np.ndarray | None = None) -> LatticeState:
    grid.check_shifts(spec)
    u0 = cell_averages(datum, grid) if averages is None else np.asarray(averages, dtype=float)
    f = equilibrium(spec, flux, u0)
    if not np.all(np.isfinite(f)):
        raise NonFiniteError(0)
    return LatticeState(f)


def collide(state: LatticeState, spec: SchemeSpec, flux: FluxModel, relax: RelaxPair) -> bool:
    """TRT relaxation, applied in place.  Returns False if the result is not finite."""
    f = state.f
    ws, wa = relax.omega_s, relax.omega_a
    u = f.sum(axis=0)
    sym_eq, anti_eq = link_parts(spec, flux, u)
    f[0] += ws * (spec.eps_zero * u - f[0])
    plus, minus = f[1::2], f[2::2]
    sym = 0.5 * (plus + minus)
    anti = 0.5 * (plus - minus)
    sym += ws * (sym_eq - sym)
    anti += wa * (anti_eq - anti)
    np.add(sym, anti, out=f[1::2])
    np.subtract(sym, anti, out=f[2::2])
    return state.is_finite()


def _shift_into(src: np.ndarray, shift: Sequence[int], out: np.ndarray) -> None:
    """``out[j] = src[j - shift]`` with periodic wraparound, without temporaries."""
    pieces = []
    for n, s in zip(src.shape, shift):
        s %= n
        if s == 0:
            pieces.append([(slice(None), slice(None))])
        else:
            pieces.append([(slice(s, None), slice(None, n - s)), (slice(None, s), slice(n - s, None))])
    for combo in itertools.product(*pieces):
        dst = tuple(p[0] for p in combo)
        org = tuple(p[1] for p in combo)
        out[dst] = src[org]


def stream(state: LatticeState, spec: SchemeSpec, grid: GridSpec) -> None:
    """Advect each component by ``c_k / lam`` cells, then swap buffers."""
    shifts = spec.shifts()
    for k in range(state.q):
        _shift_into(state.f[k], shifts[k], state.back[k])
    state.f, state.back = state.back, state.f
    state.step += 1


def step(state: LatticeState, spec: SchemeSpec, flux: FluxModel, relax: RelaxPair, grid: GridSpec) -> None:
    with np.errstate(over="ignore", invalid="ignore"):
        finite = collide(state, spec, flux, relax)
    stream(state, spec, grid)
    if not finite:
        raise NonFiniteError(state.step)


def run(spec: SchemeSpec, flux: FluxModel, datum: InitialDatum, grid: GridSpec, relax: RelaxPair,
        T: float, observers: Iterable[Callable] = (), *, reference=None, observe_every: int = 1,
        raise_on_blowup: bool = False, keep_final_f: bool = True):
    """Run ``ceil(T/dt)`` collide-and-stream steps from equilibrium initial data.

    Diagnostics are recorded every ``observe_every`` steps (and at the
    last one); extra ``observers`` are called as ``obs(state, t)``.  On
    blow-up the partial report is returned with ``blew_up`` set, or
    attached to a raised :class:`NonFiniteError` if ``raise_on_blowup``.
    """
    from .diagnostics import Recorder

    recorder = Recorder(spec, flux, grid, reference=reference)
    observers = list(observers)
    state = init_at_equilibrium(spec, flux, datum, grid)
    recorder(state)
    for obs in observers:
        obs(state, 0.0)
    nsteps = grid.steps_to(T)
    for n in range(1, nsteps + 1):
        try:
            step(state, spec, flux, relax, grid)
        except NonFiniteError as err:
            recorder.report.mark_blowup(err.step)
            if raise_on_blowup:
                err.report = recorder.report
                raise
            break
        if n % observe_every == 0 or n == nsteps:
            recorder(state)
            for obs in observers:
                obs(state, state.step * grid.dt)
    if keep_final_f:
        recorder.report.final_f = state.f.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        recorder.report.final_u = state.moment()
    recorder.report.final_step = state.step
    return recorder.report


def write_field_csv(path, grid: GridSpec, u: np.ndarray, f: np.ndarray | None = None) -> None:
    """Snapshot as CSV: ``x_1..x_d, u[, f_1..f_q]``, row-major, 17 significant digits."""
    import csv

    mesh = grid.mesh()
    cols = [m.ravel() for m in mesh] + [np.asarray(u).ravel()]
    header = [f"x_{a + 1}" for a in range(grid.d)] + ["u"]
    if f is not None:
        cols += [fk.ravel() for fk in f]
        header += [f"f_{k + 1}" for k in range(f.shape[0])]
    table = np.column_stack(cols)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in table:
            writer.writerow([f"{v:.17g}" for v in row])
