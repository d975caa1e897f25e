"""Two-relaxation-time lattice Boltzmann schemes for scalar conservation laws."""
from .scheme import FluxModel, RelaxPair, SchemeSpec, burgers, d1q3, d2q5, equilibrium, rotated_burgers, validate
from .kernel import GridSpec, InitialDatum, LatticeState, NonFiniteError, run
from .diagnostics import RunReport
from .monotonicity import MonotonicityProblem, bgk_upper_bound, is_monotone, magic_max_omega_a, rasterize

__all__ = [
    "FluxModel", "RelaxPair", "SchemeSpec", "burgers", "d1q3", "d2q5", "equilibrium", "rotated_burgers",
    "validate", "GridSpec", "InitialDatum", "LatticeState", "NonFiniteError", "run", "RunReport",
    "MonotonicityProblem", "bgk_upper_bound", "is_monotone", "magic_max_omega_a", "rasterize",
]
