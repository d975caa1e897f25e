"""Discrete velocity model, equilibria and flux models for TRT schemes.

Indexing is zero-based throughout: component 0 is the zero velocity and
link ``j`` occupies components ``2*j + 1`` (velocity ``+c_j``) and
``2*j + 2`` (velocity ``-c_j``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

CONSTRAINT_TOL = 1e-12
RELAX_TOL = 1e-14

ScalarFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FluxModel:
    """Flux components ``phi_alpha`` and their derivatives.

    ``convexity`` holds one entry per component: +1 (convex), -1 (concave)
    or 0 (unknown).  ``sonic_points`` gives the extremum of each convex or
    concave component; both only feed the exact Riemann flux of the
    Godunov oracle.
    """

    components: tuple[ScalarFn, ...]
    derivatives: tuple[ScalarFn, ...]
    name: str = "custom"
    convexity: tuple[int, ...] | None = None
    sonic_points: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.components) != len(self.derivatives):
            raise ValueError("need one derivative per flux component")
        if not self.components:
            raise ValueError("flux needs at least one component")
        for alpha, phi in enumerate(self.components):
            at_zero = float(np.asarray(phi(np.array(0.0))))
            if abs(at_zero) > 1e-14:
                raise ValueError(f"flux component {alpha} does not vanish at 0 ({at_zero!r})")
        if self.convexity is None:
            object.__setattr__(self, "convexity", (0,) * self.dim)
        if self.sonic_points is None:
            object.__setattr__(self, "sonic_points", (0.0,) * self.dim)

    @property
    def dim(self) -> int:
        return len(self.components)

    def __call__(self, u) -> np.ndarray:
        """Stack of flux values, shape ``(d,) + u.shape``."""
        u = np.asarray(u, dtype=float)
        return np.stack([np.broadcast_to(phi(u), u.shape) for phi in self.components])

    def derivative(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([np.broadcast_to(dphi(u), u.shape) for dphi in self.derivatives])

    def check_derivatives(self, low: float = -1.0, high: float = 1.0, samples: int = 100,
                          seed: int = 0, tol: float = 1e-6) -> float:
        """Largest central-difference mismatch of the derivatives on random points.

        Raises ``ValueError`` when it exceeds ``tol``.
        """
        rng = np.random.default_rng(seed)
        u = rng.uniform(low, high, samples)
        h = 1e-6 * np.maximum(1.0, np.abs(u))
        fd = (self(u + h) - self(u - h)) / (2 * h)
        worst = float(np.max(np.abs(fd - self.derivative(u))))
        if worst > tol:
            raise ValueError(f"flux derivative mismatch {worst:.3e} exceeds {tol:g}")
        return worst


def burgers() -> FluxModel:
    return FluxModel(
        components=(lambda u: 0.5 * u * u,),
        derivatives=(lambda u: u,),
        name="burgers",
        convexity=(1,),
        sonic_points=(0.0,),
    )


def rotated_burgers(theta: float = math.pi / 4) -> FluxModel:
    """Burgers flux spread over two directions: ``(cos t, sin t) * u^2/2``."""
    c, s = math.cos(theta), math.sin(theta)
    return FluxModel(
        components=(lambda u: c * 0.5 * u * u, lambda u: s * 0.5 * u * u),
        derivatives=(lambda u: c * u, lambda u: s * u),
        name=f"rotated-burgers(theta={theta!r})",
        convexity=(int(np.sign(c)), int(np.sign(s))),
        sonic_points=(0.0, 0.0),
    )


@dataclass(frozen=True)
class SchemeSpec:
    """A DdQq model with ``q = 1 + 2L`` velocities.

    Only one representative per link is stored: ``velocities[j]`` is
    ``c_{2j}``, ``eps_link[j]`` is the shared linear coefficient of the
    link and ``sigma[j]`` the (non-negative) flux coefficients of the
    ``+c`` member; the ``-c`` member carries ``-sigma[j]``.
    """

    lam: float
    velocities: np.ndarray  # (L, d), entries in lam * Z
    eps_zero: float
    eps_link: np.ndarray  # (L,)
    sigma: np.ndarray  # (L, d)
    name: str = "custom"

    def __post_init__(self):
        vel = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        eps = np.atleast_1d(np.asarray(self.eps_link, dtype=float))
        sig = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if vel.shape != sig.shape or eps.shape != (vel.shape[0],):
            raise ValueError(
                f"inconsistent shapes: velocities {vel.shape}, sigma {sig.shape}, eps_link {eps.shape}"
            )
        if self.lam <= 0:
            raise ValueError("lattice velocity must be positive")
        for arr in (vel, eps, sig):
            arr.setflags(write=False)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "eps_link", eps)
        object.__setattr__(self, "sigma", sig)

    @property
    def d(self) -> int:
        return self.velocities.shape[1]

    @property
    def links(self) -> int:
        return self.velocities.shape[0]

    @property
    def q(self) -> int:
        return 1 + 2 * self.links

    @property
    def eps(self) -> np.ndarray:
        """All q linear coefficients, zero-based layout."""
        out = np.empty(self.q)
        out[0] = self.eps_zero
        out[1::2] = self.eps_link
        out[2::2] = self.eps_link
        return out

    @property
    def sigma_full(self) -> np.ndarray:
        """All q x d flux coefficients."""
        out = np.zeros((self.q, self.d))
        out[1::2] = self.sigma
        out[2::2] = -self.sigma
        return out

    @property
    def all_velocities(self) -> np.ndarray:
        out = np.zeros((self.q, self.d))
        out[1::2] = self.velocities
        out[2::2] = -self.velocities
        return out

    def shifts(self) -> np.ndarray:
        """Integer grid shifts ``c_k / lam``, shape (q, d)."""
        ratio = self.all_velocities / self.lam
        shifts = np.rint(ratio)
        if np.max(np.abs(ratio - shifts), initial=0.0) > 1e-12:
            raise ValueError("velocities are not integer multiples of the lattice velocity")
        return shifts.astype(int)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lam": self.lam,
            "velocities": self.velocities.tolist(),
            "eps_zero": self.eps_zero,
            "eps_link": self.eps_link.tolist(),
            "sigma": self.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SchemeSpec":
        return cls(
            lam=float(data["lam"]),
            velocities=np.asarray(data["velocities"], dtype=float),
            eps_zero=float(data["eps_zero"]),
            eps_link=np.asarray(data["eps_link"], dtype=float),
            sigma=np.asarray(data["sigma"], dtype=float),
            name=data.get("name", "custom"),
        )


def d1q3(eps_link: float, lam: float = 2.0) -> SchemeSpec:
    """D1Q3 with the free coefficient ``eps_2``; the rest follows from consistency."""
    return SchemeSpec(
        lam=lam,
        velocities=np.array([[lam]]),
        eps_zero=1.0 - 2.0 * eps_link,
        eps_link=np.array([eps_link]),
        sigma=np.array([[1.0 / (2.0 * lam)]]),
        name="d1q3",
    )


def d2q5(eps_x: float, eps_y: float | None = None, lam: float = 2.0) -> SchemeSpec:
    eps_y = eps_x if eps_y is None else eps_y
    return SchemeSpec(
        lam=lam,
        velocities=np.array([[lam, 0.0], [0.0, lam]]),
        eps_zero=1.0 - 2.0 * (eps_x + eps_y),
        eps_link=np.array([eps_x, eps_y]),
        sigma=np.array([[1.0 / (2.0 * lam), 0.0], [0.0, 1.0 / (2.0 * lam)]]),
        name="d2q5",
    )


@dataclass(frozen=True)
class Violation:
    constraint: str
    residual: float

    def __str__(self):
        return f"{self.constraint}: residual {self.residual:.3e}"


def validate(spec: SchemeSpec, tol: float = CONSTRAINT_TOL) -> list[Violation]:
    """Check the velocity layout, link symmetry and consistency constraints.

    Returns an empty list when the scheme is consistent.
    """
    found: list[Violation] = []
    try:
        spec.shifts()
    except ValueError:
        ratio = spec.velocities / spec.lam
        found.append(Violation("velocities in lam*Z^d", float(np.max(np.abs(ratio - np.rint(ratio))))))
    if np.any(np.all(spec.velocities == 0, axis=1)):
        found.append(Violation("link velocities non-zero", 0.0))

    neg = spec.sigma[spec.sigma < 0]
    if neg.size:
        found.append(Violation("sigma_{2j,alpha} >= 0", float(-neg.min())))

    mass = spec.eps_zero + 2.0 * spec.eps_link.sum() - 1.0
    if abs(mass) > tol:
        found.append(Violation("eps_1 + 2 sum eps_2j = 1", abs(mass)))

    # 2 sum_j c_{2j,alpha} sigma_{2j,p} = delta_{alpha,p}
    moment = 2.0 * spec.velocities.T @ spec.sigma
    resid = moment - np.eye(spec.d)
    for alpha, p in zip(*np.nonzero(np.abs(resid) > tol)):
        found.append(Violation(f"2 sum c_(2j,{alpha + 1}) sigma_(2j,{p + 1}) = delta", float(abs(resid[alpha, p]))))
    return found


def equilibrium(spec: SchemeSpec, flux: FluxModel, u) -> np.ndarray:
    """Equilibrium distributions, shape ``(q,) + u.shape``.

    ``f_k^eq(u) = eps_k u + sum_alpha sigma_{k,alpha} phi_alpha(u)``.
    """
    u = np.asarray(u, dtype=float)
    if flux.dim != spec.d:
        raise ValueError(f"flux has {flux.dim} components, scheme dimension is {spec.d}")
    phi = flux(u)
    # a_j(u) = sum_alpha sigma_{2j,alpha} phi_alpha(u)
    anti = np.tensordot(spec.sigma, phi, axes=(1, 0))
    out = np.empty((spec.q,) + u.shape)
    out[0] = spec.eps_zero * u
    sym = spec.eps_link.reshape((-1,) + (1,) * u.ndim) * u
    out[1::2] = sym + anti
    out[2::2] = sym - anti
    return out


def link_parts(spec: SchemeSpec, flux: FluxModel, u) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric and anti-symmetric equilibrium parts per link, each ``(L,) + u.shape``."""
    u = np.asarray(u, dtype=float)
    sym = spec.eps_link.reshape((-1,) + (1,) * u.ndim) * u
    anti = np.tensordot(spec.sigma, flux(u), axes=(1, 0))
    return sym, anti


def equilibrium_derivative_bounds(spec: SchemeSpec, flux: FluxModel, m: float,
                                  samples: int = 100001) -> np.ndarray:
    """Per-link ``max_{|u| <= m} |sum_alpha sigma_{2j,alpha} phi'_alpha(u)|``.

    Evaluated on a uniform sampling of ``[-m, m]`` that always contains
    both endpoints and zero.
    """
    if m < 0:
        raise ValueError("data bound m must be non-negative")
    if samples < 2:
        raise ValueError("need at least two samples")
    u = np.union1d(np.linspace(-m, m, samples), [0.0])
    combo = np.tensordot(spec.sigma, flux.derivative(u), axes=(1, 0))
    return np.max(np.abs(combo), axis=1)


@dataclass(frozen=True)
class RelaxPair:
    omega_s: float
    omega_a: float

    def __post_init__(self):
        for label, w in (("omega_s", self.omega_s), ("omega_a", self.omega_a)):
            if not (0.0 < w <= 2.0):
                raise ValueError(f"{label}={w!r} is outside (0, 2]")

    @classmethod
    def bgk(cls, omega: float) -> "RelaxPair":
        return cls(omega, omega)

    @classmethod
    def magic(cls, omega_a: float) -> "RelaxPair":
        return cls(2.0 - omega_a, omega_a)

    @property
    def is_bgk(self) -> bool:
        return abs(self.omega_s - self.omega_a) <= RELAX_TOL

    @property
    def is_magic(self) -> bool:
        return abs(self.omega_s + self.omega_a - 2.0) <= RELAX_TOL

    @property
    def damping(self) -> float:
        """Geometric contraction factor of the non-equilibrium parts."""
        return max(abs(1.0 - self.omega_s), abs(1.0 - self.omega_a))


__all__ = [
    "FluxModel",
    "SchemeSpec",
    "RelaxPair",
    "Violation",
    "burgers",
    "rotated_burgers",
    "d1q3",
    "d2q5",
    "validate",
    "equilibrium",
    "link_parts",
    "equilibrium_derivative_bounds",
]
