import math

import numpy as np
import pytest

from fracgraph.errors import GraphsDifferOutsideWindow, NonconvergedQuadrature, WindowTooShort
from fracgraph.kernel import PiecewiseLinear, QuadratureSpec, Rect, interaction
from fracgraph.perimeter import EnergyWindow, energy_delta

S = 0.5
FLAT = PiecewiseLinear(np.array([-1.0, 1.0]), np.array([0.0, 0.0]))
TENT = PiecewiseLinear(np.array([-1.0, 0.0, 1.0]), np.array([0.0, 0.1, 0.0]))
WIN = EnergyWindow(-1.0, 1.0, 1.0)


def _staircase_gain(n: int) -> float:
    """Perimeter gained by stacking the midpoint staircase of the tent on the half-plane."""
    inf = math.inf
    q = QuadratureSpec(rel_tol=1e-8, abs_tol=1e-12)
    x = np.linspace(-1, 1, n + 1)
    mid = 0.5 * (x[1:] + x[:-1])
    h = 0.1 * (1 - np.abs(mid))
    cols = [Rect(x[k], x[k + 1], 0, h[k]) for k in range(n)]
    above = [Rect(x[j], x[j + 1], h[j], inf) for j in range(n)]
    above += [Rect(-inf, -1, 0, inf), Rect(1, inf, 0, inf)]
    below = Rect(-inf, inf, -inf, 0)
    tot = 0.0
    for k in range(n // 2):  # mirror symmetric
        tot += 2 * (sum(interaction(cols[k], T, S, q) for T in above) - interaction(cols[k], below, S, q))
    return tot


@pytest.mark.slow
def test_matches_extrapolated_staircase_sum():
    # staircase error has a self-similar n^{-(1-s)} part and a fixed-kink n^{-(2-s)} part
    ns = (16, 32, 64)
    vals = [_staircase_gain(n) for n in ns]
    A = np.array([[1.0, n ** -(1 - S), n ** -(2 - S)] for n in ns])
    limit = np.linalg.solve(A, vals)[0]
    got = energy_delta(TENT, FLAT, WIN, S)
    assert got == pytest.approx(limit, rel=0.05)
    assert energy_delta(FLAT, TENT, WIN, S) == pytest.approx(-0.0415879851, rel=1e-7)


def test_identical_graphs_give_zero():
    assert energy_delta(TENT, TENT, WIN, S) == 0.0


def test_antisymmetric():
    other = PiecewiseLinear(np.array([-1.0, -0.3, 0.5, 1.0]), np.array([0.0, -0.05, 0.2, 0.0]))
    a = energy_delta(TENT, other, WIN, S)
    b = energy_delta(other, TENT, WIN, S)
    assert a == pytest.approx(-b, rel=1e-12)


def test_translation_invariant():
    shift = 0.37
    tent = PiecewiseLinear(TENT.knots + shift, TENT.values)
    flat = PiecewiseLinear(FLAT.knots + shift, FLAT.values)
    assert energy_delta(flat, tent, WIN.shifted(shift), S) == pytest.approx(
        energy_delta(FLAT, TENT, WIN, S), rel=1e-9)


def test_independent_of_window_size():
    wide = EnergyWindow(-2.0, 3.0, 5.0)
    assert energy_delta(FLAT, TENT, wide, S) == pytest.approx(energy_delta(FLAT, TENT, WIN, S), rel=1e-6)


def test_error_estimate_returned():
    val, err = energy_delta(FLAT, TENT, WIN, S, return_error=True)
    assert err < 1e-7 * abs(val)
    with pytest.raises(NonconvergedQuadrature):
        energy_delta(FLAT, TENT, WIN, S, q=QuadratureSpec(rel_tol=1e-16, abs_tol=1e-20))


def test_graphs_differ_outside_window():
    with pytest.raises(GraphsDifferOutsideWindow):
        energy_delta(FLAT, TENT, EnergyWindow(-0.5, 0.5, 1.0), S)


def test_window_too_short():
    with pytest.raises(WindowTooShort):
        energy_delta(FLAT, TENT, EnergyWindow(-1.0, 1.0, 0.05), S)


def test_discrete_minimizer_beats_local_perturbations(preset_solution, rng):
    sol = preset_solution.solution
    win = EnergyWindow(-sol.d, sol.d, 1.0)
    x = sol.nodes
    for _ in range(3):
        c, r, a = rng.uniform(-10, 10), rng.uniform(0.5, 3.0), rng.uniform(-0.02, 0.02)
        bump = a * np.clip(1 - np.abs(x - c) / r, 0, None)
        val, err = energy_delta(sol, sol.with_values(sol.values + bump), win, S, return_error=True)
        assert val < -err
