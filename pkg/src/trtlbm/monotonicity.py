"""Monotonicity region of the TRT relaxation in the (omega_s, omega_a) plane.

The region is an intersection of half-planes, one for the zero velocity
and one per link.  Margins are ``rhs - lhs`` of each inequality, so a
point is inside exactly when every margin is non-negative.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .scheme import FluxModel, RelaxPair, SchemeSpec, equilibrium_derivative_bounds

# |margin| below this is snapped to zero so named boundary points count as inside
MARGIN_TOL = 1e-12


@dataclass(frozen=True)
class MonotonicityProblem:
    spec: SchemeSpec
    flux: FluxModel
    m: float
    G: np.ndarray = field(default=None)

    def __post_init__(self):
        G = self.G
        if G is None:
            G = equilibrium_derivative_bounds(self.spec, self.flux, self.m)
        G = np.asarray(G, dtype=float).reshape(self.spec.links)
        if np.any(G < 0):
            raise ValueError("derivative bounds G_j must be non-negative")
        G = G.copy()
        G.flags.writeable = False
        object.__setattr__(self, "G", G)

    @property
    def equilibria_monotone(self) -> bool:
        """Every equilibrium is non-decreasing on ``[-m, m]``."""
        return self.spec.eps_zero >= 0 and bool(np.all(self.spec.eps_link >= self.G))


@dataclass(frozen=True)
class Verdict:
    inside: bool
    zero_margin: float
    link_margins: tuple[float, ...]

    @property
    def margins(self) -> tuple[float, ...]:
        return (self.zero_margin,) + self.link_margins

    @property
    def worst(self) -> float:
        return min(self.margins)


def _snap(x: np.ndarray) -> np.ndarray:
    return np.where(np.abs(x) <= MARGIN_TOL, 0.0, x)


def margins(problem: MonotonicityProblem, omega_s, omega_a) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised margins: zero-velocity array and link array of shape ``(L,) + shape``."""
    ws = np.asarray(omega_s, dtype=float)
    wa = np.asarray(omega_a, dtype=float)
    spec = problem.spec
    zero = ws * spec.eps_zero - np.maximum(0.0, ws - 1.0)
    slack = 0.5 * np.minimum(np.minimum(2.0 - ws - wa, 0.0), wa - ws)
    shape = (-1,) + (1,) * np.broadcast(ws, wa).ndim
    eps = spec.eps_link.reshape(shape)
    G = problem.G.reshape(shape)
    link = ws * eps + slack - wa * G
    return _snap(zero), _snap(link)


def is_monotone(problem: MonotonicityProblem, relax: RelaxPair) -> Verdict:
    ws, wa = relax.omega_s, relax.omega_a
    if not (0.0 < ws <= 2.0 and 0.0 < wa <= 2.0):
        raise ValueError(f"relaxation pair {(ws, wa)} outside (0, 2]^2")
    zero, link = margins(problem, ws, wa)
    zero = float(zero)
    links = tuple(float(v) for v in link)
    inside = zero >= 0.0 and all(v >= 0.0 for v in links)
    return Verdict(inside, zero, links)


def bgk_upper_bound(problem: MonotonicityProblem) -> float | None:
    """Right end of the BGK interval ``(0, omega_max]``; None when that interval is empty."""
    if not problem.equilibria_monotone:
        return None
    spec = problem.spec
    bounds = [math.inf if spec.eps_zero >= 1.0 else 1.0 / (1.0 - spec.eps_zero)]
    bounds += [1.0 / (1.0 - e + g) for e, g in zip(spec.eps_link, problem.G)]
    return float(min(bounds))


@dataclass(frozen=True)
class MagicLimit:
    """Supremum of ``omega_a`` on the magic line inside the region.

    ``attained`` is False when the supremum is 2, which no member reaches.
    """

    omega_a: float
    attained: bool

    @property
    def omega_s(self) -> float:
        return 2.0 - self.omega_a


def _magic_constraints(problem: MonotonicityProblem, low: bool) -> list[tuple[float, float]]:
    """Margins along ``omega_s = 2 - w`` as ``alpha + beta*w`` on one linear piece."""
    e1 = problem.spec.eps_zero
    out = []
    if low:  # 0 < w <= 1, so omega_s >= 1
        out.append((2.0 * e1 - 1.0, 1.0 - e1))
        for e, g in zip(problem.spec.eps_link, problem.G):
            out.append((2.0 * e - 1.0, 1.0 - e - g))
    else:  # 1 <= w < 2
        out.append((2.0 * e1, -e1))
        for e, g in zip(problem.spec.eps_link, problem.G):
            out.append((2.0 * e, -(e + g)))
    return out


def _feasible(constraints, lo: float, hi: float) -> tuple[float, float] | None:
    for alpha, beta in constraints:
        if abs(beta) <= MARGIN_TOL:
            if alpha < -MARGIN_TOL:
                return None
        elif beta > 0:
            lo = max(lo, -alpha / beta)
        else:
            hi = min(hi, -alpha / beta)
    if lo > hi + MARGIN_TOL:
        return None
    return lo, hi


def magic_max_omega_a(problem: MonotonicityProblem) -> MagicLimit | None:
    """Largest ``omega_a`` with ``(2 - omega_a, omega_a)`` in the region; None if the line misses it."""
    best = None
    for low, (lo, hi) in ((True, (0.0, 1.0)), (False, (1.0, 2.0))):
        piece = _feasible(_magic_constraints(problem, low), lo, hi)
        if piece is None or piece[1] <= 0.0:
            continue
        best = piece[1] if best is None else max(best, piece[1])
    if best is None:
        return None
    if best >= 2.0 - MARGIN_TOL:
        return MagicLimit(2.0, False)
    return MagicLimit(float(best), True)


@dataclass
class RegionRaster:
    """Membership on cell centres of a uniform grid over ``(0, 2]^2``.

    ``cells[i, k]`` refers to ``omega_s = axis[i]`` and ``omega_a = axis[k]``.
    """

    resolution: int
    axis: np.ndarray
    cells: np.ndarray

    @property
    def h(self) -> float:
        return 2.0 / self.resolution

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["omega_s", "omega_a", "inside"])
            for i, ws in enumerate(self.axis):
                for k, wa in enumerate(self.axis):
                    writer.writerow([f"{ws:.17g}", f"{wa:.17g}", int(self.cells[i, k])])

    def write_pgm(self, path) -> None:
        """Binary PGM: omega_s to the right, omega_a upwards, inside cells black."""
        img = np.where(self.cells.T[::-1], 0, 255).astype(np.uint8)
        n = self.resolution
        with open(path, "wb") as fh:
            fh.write(f"P5\n{n} {n}\n255\n".encode("ascii"))
            fh.write(img.tobytes())


def raster_axis(resolution: int) -> np.ndarray:
    return (np.arange(resolution) + 0.5) * (2.0 / resolution)


def rasterize(problem: MonotonicityProblem, resolution: int) -> RegionRaster:
    if resolution < 8:
        raise ValueError("raster resolution must be at least 8")
    axis = raster_axis(resolution)
    ws, wa = np.meshgrid(axis, axis, indexing="ij")
    zero, link = margins(problem, ws, wa)
    cells = (zero >= 0.0) & np.all(link >= 0.0, axis=0)
    return RegionRaster(resolution, axis, cells)


@dataclass(frozen=True)
class StructureReport:
    convexity_ok: bool
    no_omega_two_ok: bool
    diagonal_interior_ok: bool
    diagonal_checked: bool = False
    detail: str = ""

    @property
    def all_ok(self) -> bool:
        return self.convexity_ok and self.no_omega_two_ok and self.diagonal_interior_ok


def _segment_convexity(cells: np.ndarray, pts: np.ndarray) -> bool:
    """Pairwise segment scan, used for small or degenerate inside sets."""
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            p, q = pts[a], pts[b]
            steps = int(np.max(np.abs(q - p)))
            for s in range(1, steps):
                x = p + (q - p) * s / steps
                if np.allclose(x, np.rint(x)) and not cells[tuple(np.rint(x).astype(int))]:
                    return False
    return True


def _is_convex(cells: np.ndarray) -> bool:
    """Every cell centre strictly inside the hull of inside centres must be inside.

    This is exact for rasters of a convex set sampled at cell centres.
    """
    from scipy.spatial import ConvexHull, QhullError

    pts = np.argwhere(cells).astype(float)
    if len(pts) < 3:
        return _segment_convexity(cells, pts)
    try:
        hull = ConvexHull(pts)
    except QhullError:
        # collinear inside set
        return _segment_convexity(cells, pts[np.lexsort(pts.T[::-1])][[0, -1]]) and \
            _collinear_filled(cells, pts)
    lo = pts.min(axis=0).astype(int)
    hi = pts.max(axis=0).astype(int)
    gi, gk = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    cand = np.column_stack([gi.ravel(), gk.ravel()]).astype(float)
    eq = hull.equations
    strictly_in = np.all(cand @ eq[:, :2].T + eq[:, 2] < -1e-9, axis=1)
    idx = cand[strictly_in].astype(int)
    return bool(np.all(cells[idx[:, 0], idx[:, 1]]))


def _collinear_filled(cells: np.ndarray, pts: np.ndarray) -> bool:
    order = pts[np.lexsort(pts.T[::-1])]
    p, q = order[0], order[-1]
    steps = int(np.max(np.abs(q - p)))
    for s in range(steps + 1):
        x = p + (q - p) * s / steps
        if np.allclose(x, np.rint(x)) and not cells[tuple(np.rint(x).astype(int))]:
            return False
    return True


def apex_cells(problem: MonotonicityProblem) -> int | None:
    """Diagonal cells, counted from the origin, whose 3x3 neighbourhood can leave M.

    For small rates every constraint is homogeneous, so M is a cone
    ``s_lo <= omega_a / omega_s <= s_hi``.  Cell ``i`` has neighbour centres
    at ratios ``(i + 3/2) / (i - 1/2)`` and its inverse, which must fit in the
    cone.  The count does not depend on the raster resolution.  None when the
    diagonal is not inside the cone.
    """
    spec = problem.spec
    s_hi, s_lo = math.inf, 0.0
    for eps, g in zip(spec.eps_link, problem.G):
        if g > 0:
            s_hi = min(s_hi, eps / g)
        if eps < 0.5:
            if g >= 0.5:
                return None
            s_lo = max(s_lo, (0.5 - eps) / (0.5 - g))
    if not (s_lo < 1.0 < s_hi) or spec.eps_zero < 0:
        return None
    need = 1.0
    if math.isfinite(s_hi):
        need = max(need, (1.5 + 0.5 * s_hi) / (s_hi - 1.0))
    need = max(need, (0.5 + 1.5 * s_lo) / (1.0 - s_lo))
    return math.ceil(need - 1e-12)


def structural_checks(raster: RegionRaster, omega_max: float | None = None,
                      apex: int | None = None) -> StructureReport:
    """Convexity, exclusion of omega = 2, and interiority of the diagonal.

    The diagonal check applies only when some inside cell lies strictly above
    the diagonal.  It covers diagonal cells whose whole neighbourhood stays a
    cell below ``omega_max`` (the BGK bound, or the last inside diagonal cell
    when not given).  Near the origin the region is a cone, so the first
    ``apex`` diagonal cells are skipped; pass :func:`apex_cells` of the
    problem, otherwise ``ceil(resolution / 32)`` is used.
    """
    cells = raster.cells
    n = raster.resolution
    h = raster.h
    if not cells.any():
        return StructureReport(True, True, True, False, "empty region")

    convex = _is_convex(cells)
    no_two = not (cells[-1, :].any() or cells[:, -1].any())

    ii, kk = np.nonzero(cells)
    above = bool(np.any(kk > ii))
    diag_ok = True
    examined = 0
    detail = []
    if above:
        if omega_max is None:
            diag = np.nonzero(np.diag(cells))[0]
            omega_max = raster.axis[diag.max()] if diag.size else 0.0
        start = max(1, math.ceil(n / 32) if apex is None else apex)
        for i in range(start, n - 1):
            if (i + 1.5) * h > omega_max - h:
                break
            examined += 1
            block = cells[i - 1:i + 2, i - 1:i + 2]
            if not block.all():
                diag_ok = False
                detail.append(f"diagonal cell {i} has a neighbour outside")
                break
    if not convex:
        detail.append("non-convex raster")
    if not no_two:
        detail.append("inside cells at omega = 2")
    return StructureReport(convex, no_two, diag_ok, examined > 0, "; ".join(detail))


def magic_line_last_inside(raster: RegionRaster) -> float | None:
    """Largest omega_a among inside cells whose centre pair is on the magic line."""
    n = raster.resolution
    # centres (i+1/2)h and (k+1/2)h sum to 2 when i + k = n - 1
    hits = [raster.axis[k] for k in range(n) if raster.cells[n - 1 - k, k]]
    return max(hits) if hits else None


def diagonal_last_inside(raster: RegionRaster) -> float | None:
    diag = np.nonzero(np.diag(raster.cells))[0]
    return float(raster.axis[diag.max()]) if diag.size else None
