"""Reference solutions: refined Godunov, analytic Burgers solutions, magic two-step recursion."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import GridSpec, InitialDatum, LatticeState, cell_averages, init_at_equilibrium, step
from .scheme import RELAX_TOL, FluxModel, RelaxPair, SchemeSpec, link_parts

CFL_MAX = 0.45
GENERIC_SAMPLES = 33


def godunov_flux(phi, convexity: int, sonic: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact Riemann flux: min of phi over [a, b] if a <= b, max over [b, a] otherwise.

    Closed form through the sonic point for convex (``+1``) or concave
    (``-1``) fluxes, dense sampling of the interval otherwise.
    """
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    rising = a <= b
    if convexity > 0:
        return np.where(rising, phi(np.clip(sonic, lo, hi)), np.maximum(phi(a), phi(b)))
    if convexity < 0:
        return np.where(rising, np.minimum(phi(a), phi(b)), phi(np.clip(sonic, lo, hi)))
    s = np.linspace(0.0, 1.0, GENERIC_SAMPLES).reshape((-1,) + (1,) * np.ndim(a))
    vals = phi(lo + s * (hi - lo))
    return np.where(rising, vals.min(axis=0), vals.max(axis=0))


def _component(flux: FluxModel, alpha: int):
    phi = flux.components[alpha]
    convexity = flux.convexity[alpha] if flux.convexity else 0
    sonic = flux.sonic_points[alpha] if flux.sonic_points else 0.0
    return phi, convexity, sonic


def max_wave_speed(flux: FluxModel, m: float, samples: int = 2001) -> np.ndarray:
    """Per-component ``max_{|u| <= m} |phi_alpha'(u)|``."""
    u = np.union1d(np.linspace(-m, m, samples), [0.0])
    return np.max(np.abs(flux.derivative(u)), axis=1)


def godunov_step(u: np.ndarray, flux: FluxModel, dx: float, dt: float) -> np.ndarray:
    """One dimensionally split Godunov step with periodic boundaries."""
    for alpha in range(u.ndim):
        phi, convexity, sonic = _component(flux, alpha)
        right = np.roll(u, -1, axis=alpha)
        F = godunov_flux(phi, convexity, sonic, u, right)  # flux at the j+1/2 face
        u = u - dt / dx * (F - np.roll(F, 1, axis=alpha))
    return u


def block_average(u: np.ndarray, r: int) -> np.ndarray:
    if r == 1:
        return u
    shape = []
    for n in u.shape:
        if n % r:
            raise ValueError(f"cannot average blocks of {r} cells on {n} cells")
        shape += [n // r, r]
    out = u.reshape(shape)
    return out.mean(axis=tuple(range(1, 2 * u.ndim, 2)))


@dataclass
class OracleSolution:
    """Stored oracle trajectory, possibly block-averaged by ``coarsen`` for memory."""

    fine_grid: GridSpec
    dt: float
    coarsen: int
    times: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)

    @property
    def stored_n(self) -> int:
        return self.fine_grid.n // self.coarsen

    def nearest(self, t: float) -> int:
        if t > self.times[-1] + 0.5 * self.dt:
            raise ValueError(f"time {t} beyond the oracle's final time {self.times[-1]}")
        return int(np.argmin(np.abs(np.asarray(self.times) - t)))

    def field(self, grid: GridSpec, t: float) -> np.ndarray:
        return project(self, grid, t)


def project(oracle: OracleSolution, target: GridSpec, t: float) -> np.ndarray:
    """Block average of the stored oracle state nearest in time to ``t``."""
    if target.d != oracle.fine_grid.d or target.domain != oracle.fine_grid.domain:
        raise ValueError("target grid does not cover the oracle domain")
    if oracle.stored_n % target.n:
        raise ValueError(f"refinement mismatch: {oracle.stored_n} stored cells onto {target.n}")
    return block_average(oracle.trajectory[oracle.nearest(t)], oracle.stored_n // target.n)


def godunov_solve(flux: FluxModel, datum: InitialDatum, fine_grid: GridSpec, T: float, *,
                  dt: float | None = None, record_every: int = 1, coarsen: int = 1,
                  subsamples: int = 4, cfl: float = CFL_MAX) -> OracleSolution:
    """Godunov run on ``fine_grid`` up to ``T``, storing every ``record_every``-th step."""
    dx = fine_grid.dx
    speed = float(np.max(max_wave_speed(flux, datum.m)))
    if dt is None:
        dt = cfl * dx / speed if speed > 0 else dx
    if speed * dt / dx > cfl + 1e-12:
        raise ValueError(f"oracle CFL {speed * dt / dx:.3f} exceeds {cfl}")
    u = cell_averages(datum, fine_grid, subsamples=subsamples)
    sol = OracleSolution(fine_grid, dt * record_every, coarsen)
    sol.times.append(0.0)
    sol.trajectory.append(block_average(u, coarsen))
    nsteps = math.ceil(T / dt * (1.0 - 1e-12))
    for n in range(1, nsteps + 1):
        u = godunov_step(u, flux, dx, dt)
        if n % record_every == 0 or n == nsteps:
            sol.times.append(n * dt)
            sol.trajectory.append(block_average(u, coarsen))
    return sol


def godunov_reference(flux: FluxModel, datum: InitialDatum, target: GridSpec, T: float,
                      r: int = 32, cfl: float = CFL_MAX) -> OracleSolution:
    """Oracle on a grid ``r`` times finer whose stored stamps coincide with target steps."""
    fine = target.refined(r)
    speed = float(np.max(max_wave_speed(flux, datum.m)))
    # k fine steps per target step, with speed * (dt/k) / (dx/r) <= cfl
    k = max(1, math.ceil(speed * target.dt * r / (target.dx * cfl) * (1.0 - 1e-12)))
    subsamples = max(2, 64 // r)
    return godunov_solve(flux, datum, fine, T, dt=target.dt / k, record_every=k, coarsen=r,
                         subsamples=subsamples, cfl=cfl)


@dataclass(frozen=True)
class ExactReference:
    """Analytic solution sampled at cell centres."""

    solution: object
    name: str = "exact"

    def __call__(self, t: float, *coords) -> np.ndarray:
        return np.asarray(self.solution(t, *coords), dtype=float)

    def field(self, grid: GridSpec, t: float) -> np.ndarray:
        return self(t, *grid.mesh())


def _burgers_indicator(t: float, x: np.ndarray) -> np.ndarray:
    # rarefaction from x = -1/2, shock from x = 1/2 at speed 1/2; valid while the fan
    # has not reached the shock (t < 2) and nothing has wrapped around the period
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return np.where(np.abs(x) <= 0.5, 1.0, 0.0)
    fan = (x >= -0.5) & (x <= -0.5 + t)
    plateau = (x > -0.5 + t) & (x < 0.5 + 0.5 * t)
    return np.where(fan, (x + 0.5) / t, np.where(plateau, 1.0, 0.0))


def _burgers_hat(t: float, x: np.ndarray) -> np.ndarray:
    # the ramp up steepens, the ramp down spreads; a shock forms only at t = 1/2
    x = np.asarray(x, dtype=float)
    if t >= 0.5:
        raise ValueError("the hat solution is only tabulated before shock formation")
    up = (x >= -0.5) & (x <= t)
    down = (x > t) & (x <= 0.5)
    return np.where(up, (1.0 + 2.0 * x) / (1.0 + 2.0 * t), np.where(down, (1.0 - 2.0 * x) / (1.0 - 2.0 * t), 0.0))


def burgers_indicator_exact() -> ExactReference:
    """Entropy solution for ``u0 = 1_{|x| <= 1/2}`` on ``[-1, 1]``, for ``t < 1``."""
    return ExactReference(_burgers_indicator, "burgers-indicator")


def burgers_hat_exact() -> ExactReference:
    """Solution for ``u0 = (1 - 2|x|)_+`` on ``[-1, 1]``, for ``t < 1/2``."""
    return ExactReference(_burgers_hat, "burgers-hat")


@dataclass
class MagicFDState:
    u_prev: np.ndarray
    u_curr: np.ndarray
    step: int = 1


def _link_sums(spec: SchemeSpec, flux: FluxModel, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Upwind-difference of the anti-symmetric and second difference of the symmetric parts."""
    sym, anti = link_parts(spec, flux, u)
    shifts = spec.shifts()[1::2]
    axes = tuple(range(u.ndim))
    adv = np.zeros_like(u)
    dif = np.zeros_like(u)
    for j, sh in enumerate(shifts):
        sh = tuple(int(v) for v in sh)
        back = tuple(-v for v in sh)
        # value at j - c/lam is roll by +shift
        adv += np.roll(anti[j], sh, axis=axes) - np.roll(anti[j], back, axis=axes)
        dif += np.roll(sym[j], sh, axis=axes) - 2.0 * sym[j] + np.roll(sym[j], back, axis=axes)
    return adv, dif


def magic_fd_step(state: MagicFDState, spec: SchemeSpec, flux: FluxModel, relax: RelaxPair) -> np.ndarray:
    """Advance the moment with the two-level recursion valid when ``omega_s + omega_a = 2``.

    ``u+ = (2 - wa) u - (1 - wa) u- + wa D_a(u) + (2 - wa) D_s(u)`` where
    ``D_a`` sums centred differences of the anti-symmetric equilibria and
    ``D_s`` second differences of the symmetric ones over links.
    """
    if abs(relax.omega_s + relax.omega_a - 2.0) > RELAX_TOL:
        raise ValueError(f"relaxation pair {(relax.omega_s, relax.omega_a)} is not on the magic line")
    wa = relax.omega_a
    u, u_old = state.u_curr, state.u_prev
    adv, dif = _link_sums(spec, flux, u)
    u_new = (2.0 - wa) * u - (1.0 - wa) * u_old + wa * adv + (2.0 - wa) * dif
    state.u_prev, state.u_curr = u, u_new
    state.step += 1
    return u_new


def magic_fd_init(spec: SchemeSpec, flux: FluxModel, datum: InitialDatum, grid: GridSpec,
                  relax: RelaxPair) -> MagicFDState:
    """Seed the recursion with ``u0`` and the moment after one kernel step."""
    lattice: LatticeState = init_at_equilibrium(spec, flux, datum, grid)
    u0 = lattice.moment()
    step(lattice, spec, flux, relax, grid)
    return MagicFDState(u0, lattice.moment(), 1)
