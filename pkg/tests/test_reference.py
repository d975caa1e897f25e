import numpy as np
import pytest

from trtlbm.config import named_datum
from trtlbm.diagnostics import l1_norm, total_variation
from trtlbm.kernel import GridSpec, init_at_equilibrium, run, step
from trtlbm.reference import (OracleSolution, block_average, burgers_hat_exact, burgers_indicator_exact,
                              godunov_flux, godunov_reference, godunov_solve, magic_fd_init, magic_fd_step,
                              project)
from trtlbm.scheme import RelaxPair, burgers, d1q3, d2q5, rotated_burgers

phi = burgers().components[0]


@pytest.mark.parametrize("a,b,expect", [(0.0, 1.0, 0.0), (1.0, 0.0, 0.5), (-1.0, 1.0, 0.0),
                                        (0.5, 1.0, 0.125), (-1.0, -0.5, 0.125), (-1.0, 0.5, 0.0)])
def test_godunov_flux_burgers(a, b, expect):
    assert float(godunov_flux(phi, 1, 0.0, np.array(a), np.array(b))) == pytest.approx(expect)


def test_godunov_flux_generic_matches_closed_form(rng):
    a, b = rng.uniform(-1, 1, (2, 200))
    exact = godunov_flux(phi, 1, 0.0, a, b)
    sampled = godunov_flux(phi, 0, 0.0, a, b)
    np.testing.assert_allclose(sampled, exact, atol=1e-3)
    concave = lambda u: -0.5 * u * u  # noqa: E731
    np.testing.assert_allclose(godunov_flux(concave, -1, 0.0, a, b), godunov_flux(concave, 0, 0.0, a, b), atol=1e-3)


def test_godunov_indicator_structure():
    g = GridSpec.uniform(1, 8192, 2.0)
    sol = godunov_solve(burgers(), named_datum("indicator", 1), g, 0.25, coarsen=1)
    u = sol.trajectory[-1]
    x = g.centers()[0]
    shock = x[np.argmin(np.abs(u - 0.5) + 10 * (x < 0))]
    assert shock == pytest.approx(0.625, abs=5e-3)
    foot = x[np.argmax(u > 1e-3)]
    assert foot == pytest.approx(-0.5, abs=1e-2)


def test_godunov_invariants():
    g = GridSpec.uniform(1, 256, 2.0)
    datum = named_datum("indicator", 1)
    sol = godunov_solve(burgers(), datum, g, 0.25)
    mass0 = sol.trajectory[0].sum()
    tv = [total_variation(u, g) for u in sol.trajectory]
    for u in sol.trajectory:
        assert u.min() >= -1e-12 and u.max() <= 1 + 1e-12
        assert abs(u.sum() - mass0) <= 1e-12 * mass0
    assert np.all(np.diff(tv) <= 1e-12)


def test_godunov_cfl_guard():
    g = GridSpec.uniform(1, 64, 2.0)
    with pytest.raises(ValueError):
        godunov_solve(burgers(), named_datum("indicator", 1), g, 0.1, dt=g.dx)


def test_godunov_2d_runs():
    g = GridSpec.uniform(2, 32, 2.0)
    sol = godunov_solve(rotated_burgers(), named_datum("indicator-radial", 2), g, 0.1)
    u = sol.trajectory[-1]
    assert u.min() >= -1e-12 and u.max() <= 1 + 1e-12


def test_oracle_self_convergence():
    coarse = GridSpec.uniform(1, 64, 2.0)
    datum = named_datum("indicator", 1)
    ex = burgers_indicator_exact()
    # compare each oracle with the next refinement on the coarse grid
    fields = [project(godunov_reference(burgers(), datum, coarse, 0.25, r), coarse, 0.25) for r in (8, 16, 32, 64)]
    diffs = [l1_norm(fields[i] - fields[i + 1], coarse) for i in range(3)]
    orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    assert np.all(orders >= 0.7)
    assert l1_norm(fields[-1] - ex.field(coarse, 0.25), coarse) < 0.01


def test_projection_examples():
    g = GridSpec.uniform(1, 8, 2.0)
    x = GridSpec.uniform(1, 16, 2.0).centers()[0]
    sol = OracleSolution(GridSpec.uniform(1, 16, 2.0), 0.1, 1, [0.0], [3 * x + 1])
    np.testing.assert_allclose(project(sol, g, 0.0), 0.5 * ((3 * x + 1)[::2] + (3 * x + 1)[1::2]))
    same = OracleSolution(g, 0.1, 1, [0.0], [np.full(8, 0.25)])
    np.testing.assert_array_equal(project(same, g, 0.0), np.full(8, 0.25))
    with pytest.raises(ValueError):
        project(sol, GridSpec.uniform(1, 12, 2.0), 0.0)
    with pytest.raises(ValueError):
        block_average(np.zeros(10), 4)


def test_projection_picks_nearest_stamp():
    g = GridSpec.uniform(1, 4, 2.0)
    sol = OracleSolution(g, 0.1, 1, [0.0, 0.1, 0.2], [np.zeros(4), np.ones(4), 2 * np.ones(4)])
    assert project(sol, g, 0.12)[0] == 1.0
    with pytest.raises(ValueError):
        project(sol, g, 0.5)


def test_oracle_stamps_align_with_target_steps():
    g = GridSpec.uniform(1, 64, 2.0)
    sol = godunov_reference(burgers(), named_datum("hat", 1), g, 0.25, r=32)
    np.testing.assert_allclose(sol.times, g.dt * np.arange(17), rtol=1e-12, atol=1e-15)


def test_exact_solutions():
    ex = burgers_indicator_exact()
    x = np.array([-0.6, -0.5, -0.4, 0.0, 0.6, 0.63])
    np.testing.assert_allclose(ex(0.25, x), [0, 0, 0.4, 1, 1, 0])
    hat = burgers_hat_exact()
    np.testing.assert_allclose(hat(0.0, x), np.clip(1 - 2 * np.abs(x), 0, None))
    assert hat(0.25, np.array([0.25]))[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        hat(0.6, x)


@pytest.mark.parametrize("name,exact", [("indicator", burgers_indicator_exact()), ("hat", burgers_hat_exact())])
def test_exact_agrees_with_fine_godunov(name, exact):
    g = GridSpec.uniform(1, 128, 2.0)
    sol = godunov_reference(burgers(), named_datum(name, 1), g, 0.25, r=32)
    for t in (0.0625, 0.25):
        assert l1_norm(project(sol, g, t) - exact.field(g, t), g) < 1.5e-2


def test_magic_fd_constant():
    spec, flux = d1q3(12 / 25), burgers()
    g = GridSpec.uniform(1, 16, 2.0)
    st = magic_fd_init(spec, flux, named_datum("constant", 1, value=0.3), g, RelaxPair.magic(1.4))
    for _ in range(5):
        u = magic_fd_step(st, spec, flux, RelaxPair.magic(1.4))
    np.testing.assert_allclose(u, 0.3, atol=1e-15)


def test_magic_fd_rejects_non_magic():
    spec, flux = d1q3(12 / 25), burgers()
    g = GridSpec.uniform(1, 16, 2.0)
    st = magic_fd_init(spec, flux, named_datum("hat", 1), g, RelaxPair.magic(1.0))
    with pytest.raises(ValueError):
        magic_fd_step(st, spec, flux, RelaxPair(1.0, 1.2))


def _fd_discrepancy(spec, flux, datum, grid, relax, steps):
    st = magic_fd_init(spec, flux, datum, grid, relax)
    lat = init_at_equilibrium(spec, flux, datum, grid)
    step(lat, spec, flux, relax, grid)
    worst = 0.0
    for _ in range(steps - 1):
        u = magic_fd_step(st, spec, flux, relax)
        step(lat, spec, flux, relax, grid)
        worst = max(worst, float(np.max(np.abs(u - lat.moment()))))
    return worst


def test_magic_fd_at_unit_pair_matches_bgk_one():
    g = GridSpec.uniform(1, 128, 2.0)
    assert _fd_discrepancy(d1q3(12 / 25), burgers(), named_datum("hat", 1), g, RelaxPair(1.0, 1.0), 60) <= 1e-11


def test_magic_fd_fifty_steps():
    g = GridSpec.uniform(1, 128, 2.0)
    assert _fd_discrepancy(d1q3(12 / 25), burgers(), named_datum("indicator", 1), g,
                           RelaxPair(50 / 73, 96 / 73), 50) <= 1e-11


@pytest.mark.parametrize("wa", [0.5, 1.2, 1.7, 1.95])
def test_magic_fd_holds_outside_region(wa):
    g = GridSpec.uniform(1, 64, 2.0)
    assert _fd_discrepancy(d1q3(1 / 3), burgers(), named_datum("indicator", 1), g, RelaxPair.magic(wa), 100) <= 1e-11


def test_magic_fd_two_dimensional():
    g = GridSpec.uniform(2, 32, 2.0)
    assert _fd_discrepancy(d2q5(0.2), rotated_burgers(), named_datum("indicator-radial", 2), g,
                           RelaxPair.magic(1.05), 40) <= 1e-11


@pytest.mark.parametrize("name", ["indicator", "hat"])
def test_oracle_independence(name):
    # reported error must move by less than 1% between r and 2r
    spec, flux = d1q3(12 / 25), burgers()
    datum = named_datum(name, 1)
    for n in (64, 128):
        g = GridSpec.uniform(1, n, 2.0)
        e = [run(spec, flux, datum, g, RelaxPair.magic(96 / 73), 0.25,
                 reference=godunov_reference(flux, datum, g, 0.25, r=r)).linf_l1_err for r in (32, 64)]
        assert abs(e[1] / e[0] - 1) < 0.01, (n, e)
