"""Norms, total variation, equilibrium distance and error tracking for lattice runs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .scheme import FluxModel, SchemeSpec, equilibrium

PLATEAU_FRACTION = 0.25

SERIES = ("sup_u", "inf_u", "tv_u", "tv_vec", "eq_dist", "l1_err")


def l1_norm(values, grid) -> float:
    """``dx^d`` times the sum of absolute values over cells and components."""
    return float(grid.cell_volume * np.sum(np.abs(values)))


def _axis_tv(u: np.ndarray, axes) -> float:
    total = 0.0
    for ax in axes:
        total += float(np.sum(np.abs(np.roll(u, -1, axis=ax) - u)))
    return total


def total_variation(u, grid) -> float:
    """Periodic discrete TV with the ``dx^(d-1)`` prefactor."""
    u = np.asarray(u, dtype=float)
    return grid.dx ** (grid.d - 1) * _axis_tv(u, range(u.ndim))


def vector_total_variation(state, grid) -> float:
    """Sum of the per-component total variations of ``f``."""
    f = state.f if hasattr(state, "f") else np.asarray(state, dtype=float)
    return grid.dx ** (grid.d - 1) * _axis_tv(f, range(1, f.ndim))


def equilibrium_distance(state, spec: SchemeSpec, flux: FluxModel, grid) -> float:
    """L1 distance between ``f`` and the equilibrium at its own moment."""
    f = state.f if hasattr(state, "f") else np.asarray(state, dtype=float)
    return l1_norm(f - equilibrium(spec, flux, f.sum(axis=0)), grid)


def project(oracle, grid, t: float) -> np.ndarray:
    """Reference field on ``grid`` at time ``t``; the oracle supplies ``field(grid, t)``."""
    return np.asarray(oracle.field(grid, t), dtype=float)


def l1_error(state, oracle, grid, t: float) -> float:
    u = state.moment() if hasattr(state, "moment") else np.asarray(state, dtype=float)
    return l1_norm(u - project(oracle, grid, t), grid)


def convergence_order(errors) -> np.ndarray:
    """``log2(e[i-1] / e[i])`` for successive halvings; length ``len(errors) - 1``."""
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(e[:-1] / e[1:])


@dataclass
class RunReport:
    """Time series recorded during a run.

    Every series has one entry per recorded step, the initial state included.
    """

    steps: list = field(default_factory=list)
    times: list = field(default_factory=list)
    sup_u: list = field(default_factory=list)
    inf_u: list = field(default_factory=list)
    tv_u: list = field(default_factory=list)
    tv_vec: list = field(default_factory=list)
    eq_dist: list = field(default_factory=list)
    l1_err: list = field(default_factory=list)
    blew_up: bool = False
    blowup_step: int | None = None
    message: str = ""
    final_u: np.ndarray | None = field(default=None, repr=False)
    final_f: np.ndarray | None = field(default=None, repr=False)
    final_step: int = 0

    def __len__(self):
        return len(self.steps)

    def mark_blowup(self, step: int) -> None:
        self.blew_up = True
        self.blowup_step = step
        self.message = f"non-finite values at step {step}"

    @property
    def has_error(self) -> bool:
        return any(e is not None for e in self.l1_err)

    @property
    def linf_l1_err(self) -> float | None:
        errs = [e for e in self.l1_err if e is not None]
        return max(errs) if errs else None

    def running_max_error(self) -> np.ndarray:
        errs = np.array([np.nan if e is None else e for e in self.l1_err], dtype=float)
        return np.fmax.accumulate(errs)

    def series(self, name: str) -> np.ndarray:
        return np.array([np.nan if v is None else v for v in getattr(self, name)], dtype=float)

    @property
    def max_u(self) -> float:
        return float(np.max(self.sup_u))

    @property
    def min_u(self) -> float:
        return float(np.min(self.inf_u))

    def plateau(self, name: str = "eq_dist", fraction: float = PLATEAU_FRACTION) -> float:
        """Mean of a series over its final ``fraction`` of recorded steps."""
        vals = self.series(name)
        k = max(1, int(math.ceil(fraction * len(vals))))
        return float(np.mean(vals[-k:]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("step", "t") + SERIES)
            for i in range(len(self.steps)):
                row = [str(self.steps[i]), f"{self.times[i]:.17g}"]
                for name in SERIES:
                    v = getattr(self, name)[i]
                    row.append("" if v is None else f"{v:.17g}")
                writer.writerow(row)


class Recorder:
    """Observer that appends the standard diagnostics to a :class:`RunReport`."""

    def __init__(self, spec: SchemeSpec, flux: FluxModel, grid, reference=None, report: RunReport | None = None):
        self.spec = spec
        self.flux = flux
        self.grid = grid
        self.reference = reference
        self.report = RunReport() if report is None else report

    def __call__(self, state) -> None:
        # states close to blow-up may overflow in the reductions; keep the inf values
        with np.errstate(over="ignore", invalid="ignore"):
            self._record(state)

    def _record(self, state) -> None:
        r = self.report
        grid = self.grid
        t = state.step * grid.dt
        u = state.moment()
        r.steps.append(state.step)
        r.times.append(t)
        r.sup_u.append(float(np.max(u)))
        r.inf_u.append(float(np.min(u)))
        r.tv_u.append(total_variation(u, grid))
        r.tv_vec.append(vector_total_variation(state, grid))
        r.eq_dist.append(equilibrium_distance(state, self.spec, self.flux, grid))
        if self.reference is None:
            r.l1_err.append(None)
        else:
            r.l1_err.append(l1_norm(u - project(self.reference, grid, t), grid))


def write_convergence_csv(path, dxs, errors) -> None:
    """Rows ``dx,error,order``; the first row has an empty order."""
    orders = convergence_order(errors)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dx", "error", "order"])
        for i, (dx, err) in enumerate(zip(dxs, errors)):
            writer.writerow([f"{dx:.17g}", f"{err:.17g}", "" if i == 0 else f"{orders[i - 1]:.17g}"])


def fit_geometric_rate(values, start: int = 1, stop: int | None = None) -> float:
    """Least-squares slope of ``log(values[n])`` against ``n``, returned as a rate ``exp(slope)``."""
    v = np.asarray(values, dtype=float)[start:stop]
    n = np.arange(start, start + len(v))
    keep = v > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive samples")
    slope = np.polyfit(n[keep], np.log(v[keep]), 1)[0]
    return float(np.exp(slope))


def transient_rate(eq_dist, floor: float = 1e-2) -> tuple[float, int]:
    """Geometric rate of the approach to the equilibrium-distance plateau.

    Fits ``log |d[n+1] - d[n]|`` linearly over the pre-plateau window.  The
    window ends at the first increment at or below the plateau noise, taken
    as the larger of ``floor`` times the largest increment and twice the
    median increment over the second half of the trace.  Returns the rate
    and the window length.
    """
    inc = np.abs(np.diff(np.asarray(eq_dist, dtype=float)))
    if inc.size < 2 or inc.max() == 0:
        raise ValueError("trace too short or constant")
    noise = max(floor * inc.max(), 2.0 * float(np.median(inc[inc.size // 2:])))
    small = np.nonzero(inc <= noise)[0]
    stop = int(small[0]) if small.size else inc.size
    if stop < 2:
        raise ValueError("pre-plateau window shorter than two increments")
    return fit_geometric_rate(inc, 0, stop), stop
