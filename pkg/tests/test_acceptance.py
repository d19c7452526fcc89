"""Acceptance criteria 1-9; each prints one PASS/FAIL line (also collected in the terminal summary)."""
import math

import numpy as np
import pytest

from fracgraph.cli import RunConfig, run_maxprinciple, run_stickiness, stickiness_verdict
from fracgraph.kernel import PiecewiseLinear, QuadratureSpec, RegionSet, nmc_graph, nmc_set_bruteforce
from fracgraph.model import GridFunction, paper_datum, paper_params
from fracgraph.perimeter import EnergyWindow, energy_delta
from fracgraph.solver import SolveConfig, residual
from fracgraph.verify import b_tail_integral, bump_b_bound, check_ks_geop, datum_mass_integral, reflect_gap
from test_kernel import GRAPH_SUITE

ORDERS = [k / 10 for k in range(1, 10)]


def test_criterion_1_affine_curvature_vanishes(criterion, rng):
    with criterion(1, "affine graphs have zero curvature") as c:
        q = QuadratureSpec()
        worst = 0.0
        for _ in range(5):
            u = PiecewiseLinear.affine(rng.uniform(-3, 3), rng.uniform(-2, 2))
            s = rng.uniform(0.1, 0.9)
            for x0 in rng.uniform(-10, 10, 20):
                worst = max(worst, abs(nmc_graph(u, x0, s, q)))
        c.detail = f"max |H| = {worst:.2e} (tol 1e-6)"
        assert worst <= 1e-6
        assert c.elapsed() < 10


def test_criterion_2_graph_vs_set_curvature(criterion):
    with criterion(2, "graph curvature equals region curvature") as c:
        q = QuadratureSpec()
        ratios = []
        for knots, values, x0, s in GRAPH_SUITE:
            u = PiecewiseLinear(knots, values)
            a, ea = nmc_graph(u, x0, s, q, return_error=True)
            b, eb = nmc_set_bruteforce(RegionSet(u), (x0, u(x0)), s, q, return_error=True)
            ratios.append(abs(a - b) / (3 * (ea + eb)))
        c.detail = f"max |diff| / (3 x summed error) = {max(ratios):.3f}"
        assert max(ratios) <= 1.0
        assert c.elapsed() < 120


def test_criterion_3_preset_constants_admissible(criterion):
    with criterion(3, "preset has theta > 0 and the geometric condition") as c:
        thetas = [paper_params(s).theta for s in ORDERS]
        geo = [check_ks_geop(paper_params(s)) for s in ORDERS]
        c.detail = f"min theta = {min(thetas):.6f}, min margin = {min(r.margin for r in geo):.6f}"
        # the smallest theta is 1e13 ulps above zero, so rounding cannot flip a sign
        assert min(thetas) > 1e-12 and all(r.passed for r in geo)
        assert c.elapsed() < 1


def test_criterion_4_indicator_mass(criterion):
    with criterion(4, "indicator datum mass is 1.6 eta") as c:
        errs = []
        for s in (0.1, 0.5, 0.9):
            for eta in (0.1, 0.05):
                p = paper_params(s, eta=eta)
                errs.append(abs(datum_mass_integral(paper_datum(p, 0.0), p) / (1.6 * eta) - 1))
        c.detail = f"max rel error {max(errs):.1e} (tol 1e-6)"
        assert max(errs) <= 1e-6
        assert c.elapsed() < 5


def test_criterion_5_tail_closed_form_and_bound(criterion, rng):
    with criterion(5, "tail integral closed form and strip bound") as c:
        tails, margins = [], []
        for s in (0.1, 0.5, 0.9):
            t = b_tail_integral(paper_params(s))
            tails.append(abs(t.lhs / t.rhs - 1))
        p = paper_params(0.5)
        for _ in range(20):
            r = bump_b_bound(p, rng.uniform(-p.d, -p.d + p.d0), pt_q=rng.uniform(-p.delta, p.delta))
            assert r.passed
            margins.append(r.margin / r.rhs)
        c.detail = f"tail rel error {max(tails):.1e}, min relative bound margin {min(margins):.3f}"
        assert max(tails) <= 1e-6
        assert c.elapsed() < 60


def test_criterion_6_reflection_identity(criterion, rng):
    with criterion(6, "reflection distance identity") as c:
        X = rng.uniform(-20, 20, size=(10_000, 2))
        P = rng.uniform(-20, 20, size=(10_000, 2))
        gap = np.array([reflect_gap(xx, pp) for xx, pp in zip(X, P)])
        scale = np.sum(X ** 2, axis=1) + np.sum(P ** 2, axis=1)
        rel = np.abs(gap - 4 * X[:, 0] * P[:, 0]) / scale
        c.detail = f"max error / (|X|^2 + |P|^2) = {rel.max():.1e}"
        assert rel.max() <= 16 * np.finfo(float).eps
        assert c.elapsed() < 1


def test_criterion_7_maximum_principle(criterion, tmp_path):
    with criterion(7, "odd datum gives odd solution with sign split") as c:
        cfg = RunConfig(mode="experiment-maxprinciple", n_nodes=257,
                        solve=SolveConfig(residual_tol=1e-10), output_dir=str(tmp_path))
        rep = run_maxprinciple(cfg, write=False)
        c.detail = (f"odd gap {rep.odd_gap:.1e} (tol {rep.tol_odd:.0e}), min left {rep.min_left:.2e}, "
                    f"max right {rep.max_right:.2e}, tol_sign {rep.tol_sign:.1e}")
        assert rep.passed and rep.odd_gap <= 1e-8
        assert rep.min_left >= -rep.tol_sign and rep.max_right <= rep.tol_sign
        assert c.elapsed() < 300


@pytest.mark.slow
def test_criterion_8_stickiness_sweep(criterion, tmp_path):
    with criterion(8, "jump proxy positive and above calibrated floor") as c:
        cfg = RunConfig(mode="experiment-stickiness", n_nodes=257, eta_sweep=(0.2, 0.1, 0.05, 0.025),
                        solve=SolveConfig(residual_tol=1e-10), output_dir=str(tmp_path))
        rows = run_stickiness(cfg, write=False)
        passed, checks = stickiness_verdict(rows)
        c.detail = ", ".join(f"eta={r.eta:g}: jump {r.jump_proxy:.4f} floor {r.theoretical_floor:.2e}"
                             for r in rows)
        assert all(r.jump_proxy > 0 for r in rows)
        assert all(r.jump_proxy >= 0.5 * r.theoretical_floor for r in rows[1:])
        assert passed, checks
        assert c.elapsed() < 1200


def _first_order(base: GridFunction, i: int, eps: float, win: EnergyWindow) -> float:
    """Coefficient-of-eps part of E[base + eps phi_i] - E[base], Richardson on central differences."""

    def cd(e):
        bump = np.zeros(base.n_nodes)
        bump[i] = e
        up = energy_delta(base.with_values(base.values + bump), base, win, 0.5)
        down = energy_delta(base.with_values(base.values - bump), base, win, 0.5)
        return 0.5 * (up - down)

    return (8 * cd(eps / 2) - cd(eps)) / 3


@pytest.mark.slow
def test_criterion_9_minimality(criterion, preset_solution, preset_setup, rng):
    with criterion(9, "solution is a local energy minimizer; energy slope equals residual") as c:
        p, u0 = preset_setup
        sol = preset_solution.solution
        win = EnergyWindow(-p.d, p.d, 1.0)
        x = sol.nodes
        deltas = []
        for _ in range(10):
            ctr, rad = rng.uniform(-p.d + 1, p.d - 1), rng.uniform(0.3, 4.0)
            amp = rng.choice([-1, 1]) * rng.uniform(1e-3, 5e-2)
            v = sol.with_values(sol.values + amp * np.clip(1 - np.abs(x - ctr) / rad, 0, None))
            val, err = energy_delta(sol, v, win, p.s, return_error=True)
            deltas.append(val)
            assert val <= err
        eps = 1e-3 * p.plateau_height
        dx = sol.dx
        nodes = (0, 1, 5, 60, 128, 200, 256)
        # at the minimizer both sides are at roundoff: the floor is the residual's own quadrature error
        floor = eps * dx * preset_solution.quadrature_error
        R = residual(sol, p.s)
        worst_star = max(abs(_first_order(sol, i, eps, win) - eps * dx * R[i]) - 0.3 * abs(eps * dx * R[i])
                         for i in nodes)
        assert worst_star <= floor
        rel = []
        for base in (sol.with_values(sol.values + 0.01 * np.clip(1 - np.abs(x + 5) / 3, 0, None)),
                     GridFunction.zeros(sol.n_nodes, u0, p.d)):
            R = residual(base, p.s)
            for i in nodes:
                want = eps * dx * R[i]
                if abs(want) <= 1e3 * floor:  # centre node of the odd state: zero up to roundoff
                    continue
                rel.append(abs(_first_order(base, i, eps, win) / want - 1))
        c.detail = (f"energy gains {min(-d for d in deltas):.1e}..{max(-d for d in deltas):.1e}; "
                    f"first-order rel error {max(rel):.1e} off-minimizer, "
                    f"excess {worst_star:.1e} <= floor {floor:.1e} at minimizer")
        assert max(rel) <= 0.3
        assert c.elapsed() < 600
