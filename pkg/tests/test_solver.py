import dataclasses

import numpy as np
import pytest
from scipy import integrate

from fracgraph.errors import PreconditionError, StalledStep
from fracgraph.kernel import QuadratureSpec, nmc_graph
from fracgraph.model import GridFunction, paper_datum, paper_params, zero_datum
from fracgraph.solver import SolveConfig, clamp_check, residual, residual_error, solve


def test_zero_datum_from_zero_is_immediate():
    u = GridFunction.zeros(31, zero_datum(1.0), 1.0)
    rep = solve(u, SolveConfig(), 0.5)
    assert rep.converged and rep.iters == 0 and rep.final_residual == 0.0


def test_zero_datum_from_noise_goes_flat(rng):
    u = GridFunction(31, 0.05 * rng.normal(size=31), zero_datum(1.0), 1.0)
    rep = solve(u, SolveConfig(residual_tol=1e-12, odd_symmetrize=False), 0.5)
    assert rep.converged
    assert np.max(np.abs(rep.solution.values)) < 1e-10


def test_residual_trace_non_increasing(preset_solution):
    tr = preset_solution.residual_trace
    assert preset_solution.converged
    assert np.all(np.diff(tr) <= 0)
    assert np.all(np.diff(preset_solution.energy_trace) <= 1e-12 * abs(preset_solution.energy_trace[0]))


def test_residual_spot_nodes_match_curvature_average():
    # zero datum, d = 1: R_i against the hat average of the principal-value curvature
    d, n = 1.0, 7
    x = np.linspace(-d, d, n + 2)[1:-1]
    u = GridFunction(n, 0.3 * np.cos(np.pi * x / 2) ** 2 + 0.1 * x, zero_datum(d), d)
    r = residual(u, 0.5)
    g = u.to_piecewise()
    q = QuadratureSpec(rel_tol=1e-6, abs_tol=1e-8)
    dx = u.dx
    for i in (1, 3):
        xi = x[i]
        tot = sum(integrate.quad(lambda t: nmc_graph(g, t, 0.5, q) * (1 - abs(t - xi) / dx),
                                 a, b, limit=100, epsabs=1e-7)[0]
                  for a, b in ((xi - dx, xi), (xi, xi + dx)))
        assert r[i] == pytest.approx(tot / dx, rel=1e-5)


def test_residual_error_estimate_small(preset_solution):
    assert preset_solution.quadrature_error < 1e-6
    assert np.max(residual_error(preset_solution.solution, 0.5)) == pytest.approx(
        preset_solution.quadrature_error)


def test_solution_is_odd_and_signed(preset_solution):
    v = preset_solution.solution.values
    assert np.max(np.abs(v + v[::-1])) <= 1e-12
    half = v.size // 2
    assert np.all(v[:half] >= -1e-12) and np.all(v[half + 1:] <= 1e-12)


def test_odd_equivariance_without_symmetrization(preset_setup):
    p, u0 = preset_setup
    rep = solve(GridFunction.zeros(65, u0, p.d), SolveConfig(residual_tol=1e-9, odd_symmetrize=False), p.s)
    v = rep.solution.values
    assert rep.converged
    assert np.max(np.abs(v + v[::-1])) <= 1e-3


def test_clamp_holds_and_detects_inflation(preset_solution, preset_setup):
    p, _ = preset_setup
    assert clamp_check(preset_solution, p)
    sol = preset_solution.solution
    inflated = dataclasses.replace(preset_solution, solution=sol.with_values(sol.values * 10 + np.sign(sol.values)))
    assert not clamp_check(inflated, p)


def test_indicator_datum_refused(preset_setup):
    p, _ = preset_setup
    with pytest.raises(PreconditionError):
        solve(GridFunction.zeros(33, paper_datum(p, 0.0), p.d), SolveConfig(), p.s)


def test_stalled_step_raised(preset_setup):
    # plain descent judged only on the core: the boundary-driven step raises the core
    # residual for every step length, so the step underflows
    p, u0 = preset_setup
    cfg = SolveConfig(preconditioned=False, boundary_skip=2)
    with pytest.raises(StalledStep):
        solve(GridFunction.zeros(33, u0, p.d), cfg, p.s)


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(residual_tol=0)
    with pytest.raises(ValueError):
        SolveConfig(step_shrink=1.0)
    assert SolveConfig(preconditioned=False).initial_step(0.1, 0.5) == pytest.approx(0.5 * 0.1 ** 1.5)


def test_unpreconditioned_descent_reduces_residual(preset_setup):
    p, u0 = preset_setup
    u = GridFunction.zeros(33, u0, p.d)
    rep = solve(u, SolveConfig(max_iters=50, preconditioned=False), p.s)
    assert not rep.converged
    assert rep.residual_trace[-1] < rep.residual_trace[0]


def test_first_node_refinement_within_20_percent(preset_solution, preset_solution_coarse):
    # Refinement invariant: first interior node changes by <20% from N=129 to N=257.
    # Expected to fail: the boundary layer rises like dx^{(1+s)/2}.
    fine = preset_solution.solution.values[0]
    coarse = preset_solution_coarse.solution.values[0]
    assert abs(fine - coarse) / abs(fine) < 0.2
