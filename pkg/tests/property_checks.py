"""Shared invariant checks used by the hypothesis suite and the acceptance summary.

Each check takes concrete inputs and returns the worst violation found
(positive means violated by that much, zero or below means satisfied).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from trtlbm import GridSpec, InitialDatum, RelaxPair, burgers, d1q3, d2q5, rotated_burgers
from trtlbm.diagnostics import total_variation, vector_total_variation
from trtlbm.kernel import LatticeState, collide, init_at_equilibrium, stream
from trtlbm.monotonicity import MonotonicityProblem, is_monotone, rasterize
from trtlbm.scheme import equilibrium

M = 1.0
RASTER = 64


@dataclass(frozen=True)
class Setup:
    name: str
    spec: object
    flux: object
    problem: MonotonicityProblem
    inside: np.ndarray  # (k, 2) raster centres inside M
    h: float


@lru_cache(maxsize=None)
def setups() -> tuple[Setup, ...]:
    out = []
    for name, spec, flux in (
        ("d1q3_1225", d1q3(12 / 25), burgers()),
        ("d1q3_13", d1q3(1 / 3), burgers()),
        ("d2q5_15", d2q5(1 / 5), rotated_burgers()),
    ):
        problem = MonotonicityProblem(spec, flux, M)
        raster = rasterize(problem, RASTER)
        i_s, i_a = np.nonzero(raster.cells)
        pts = np.column_stack([raster.axis[i_s], raster.axis[i_a]])
        out.append(Setup(name, spec, flux, problem, pts, raster.h))
    return tuple(out)


def relax_inside(setup: Setup, index: int, jitter: tuple[float, float]) -> RelaxPair | None:
    """Raster centre ``index`` moved by ``jitter`` (in half-cells); None if that leaves M."""
    ws, wa = setup.inside[index % len(setup.inside)]
    ws += 0.5 * setup.h * jitter[0]
    wa += 0.5 * setup.h * jitter[1]
    if not (0.0 < ws <= 2.0 and 0.0 < wa <= 2.0):
        return None
    relax = RelaxPair(ws, wa)
    return relax if is_monotone(setup.problem, relax).inside else None


def k_bounds(setup: Setup) -> tuple[np.ndarray, np.ndarray]:
    lo = equilibrium(setup.spec, setup.flux, np.array(-M))
    hi = equilibrium(setup.spec, setup.flux, np.array(M))
    return lo, hi


def point_in_k(setup: Setup, weights: np.ndarray) -> np.ndarray:
    """Per-cell state in ``K_m`` from weights in ``[0, 1]``, shape ``(q,)``."""
    lo, hi = k_bounds(setup)
    return lo + np.asarray(weights) * (hi - lo)


def _collide_cells(setup: Setup, relax: RelaxPair, f: np.ndarray) -> np.ndarray:
    state = LatticeState(np.array(f, dtype=float, copy=True))
    collide(state, setup.spec, setup.flux, relax)
    return state.f


def moment_drift(setup: Setup, relax: RelaxPair, f: np.ndarray) -> float:
    """Relative change of the per-cell moment through one collision."""
    before = f.sum(axis=0)
    after = _collide_cells(setup, relax, f).sum(axis=0)
    scale = max(1.0, float(np.max(np.abs(before))))
    return float(np.max(np.abs(after - before))) / scale - 1e-12


def collision_contraction(setup: Setup, relax: RelaxPair, f: np.ndarray, g: np.ndarray) -> float:
    """``|C f - C g|_1 - |f - g|_1`` per cell, worst over cells."""
    cf = _collide_cells(setup, relax, f)
    cg = _collide_cells(setup, relax, g)
    lhs = np.abs(cf - cg).sum(axis=0)
    rhs = np.abs(f - g).sum(axis=0)
    return float(np.max(lhs - rhs - 1e-12 * (1.0 + rhs)))


def jacobian_min(setup: Setup, relax: RelaxPair, f: np.ndarray, h: float = 1e-6) -> float:
    """Most negative entry of the collision Jacobian at the single-cell state ``f``."""
    q = f.shape[0]
    jac = np.empty((q, q))
    for k in range(q):
        e = np.zeros(q)
        e[k] = h
        jac[:, k] = (_collide_cells(setup, relax, f + e) - _collide_cells(setup, relax, f - e)) / (2 * h)
    return float(jac.min())


def _grid(setup: Setup, n: int) -> GridSpec:
    return GridSpec.uniform(setup.spec.d, n, setup.spec.lam)


def _datum(values: np.ndarray) -> InitialDatum:
    vals = np.asarray(values, dtype=float)
    return InitialDatum(lambda *x: np.zeros_like(x[0]), M, cell_average=lambda grid: vals)


def run_pair(setup: Setup, relax: RelaxPair, u0: np.ndarray, v0: np.ndarray, steps: int) -> dict:
    """Advance two data side by side and collect the worst violation of each invariant.

    Keys: ``l1`` (paired contraction of the moment), ``tv_vec`` (increase of
    TV_vec between consecutive steps), ``tv_u`` (TV(u) above TV_vec),
    ``max_principle`` (excursion of ``u`` outside ``[-m, m]``), ``k_bounds``
    (excursion of ``f`` outside ``K_m``), ``mass`` (relative global drift).
    """
    grid = _grid(setup, u0.shape[0])
    fs = init_at_equilibrium(setup.spec, setup.flux, _datum(u0), grid)
    gs = init_at_equilibrium(setup.spec, setup.flux, _datum(v0), grid)
    lo, hi = k_bounds(setup)
    shape = (-1,) + (1,) * grid.d
    lo, hi = lo.reshape(shape), hi.reshape(shape)
    d0 = float(np.abs(u0 - v0).sum()) * grid.cell_volume
    mass0 = float(fs.f.sum())
    worst = dict(l1=-np.inf, tv_vec=-np.inf, tv_u=-np.inf, max_principle=-np.inf, k_bounds=-np.inf, mass=-np.inf)
    tv_prev = vector_total_variation(fs, grid)
    tol = 1e-12
    for _ in range(steps):
        for s in (fs, gs):
            collide(s, setup.spec, setup.flux, relax)
            stream(s, setup.spec, grid)
        u, v = fs.moment(), gs.moment()
        dist = float(np.abs(u - v).sum()) * grid.cell_volume
        worst["l1"] = max(worst["l1"], dist - d0 - tol * (1.0 + d0))
        tv_now = vector_total_variation(fs, grid)
        worst["tv_vec"] = max(worst["tv_vec"], tv_now - tv_prev - tol * (1.0 + tv_prev))
        worst["tv_u"] = max(worst["tv_u"], total_variation(u, grid) - tv_now - tol * (1.0 + tv_now))
        tv_prev = tv_now
        worst["max_principle"] = max(worst["max_principle"], float(np.max(np.abs(u))) - M - 1e-10)
        below = float(np.max(lo - fs.f))
        above = float(np.max(fs.f - hi))
        worst["k_bounds"] = max(worst["k_bounds"], below - 1e-10, above - 1e-10)
        worst["mass"] = max(worst["mass"], abs(float(fs.f.sum()) - mass0) / max(1.0, abs(mass0)) - 1e-12)
    return worst
