"""Localized fractional-perimeter differences between subgraphs agreeing outside a window.

For subgraphs ``E_u``, ``E_v`` with ``u = v`` outside ``(a, b)`` the
difference ``Per_s(E_u, Omega_L) - Per_s(E_v, Omega_L)`` is independent of
``L`` and equals ``E[u] - E[v]`` for the graph energy of
``fracgraph.discrete``: every pair of vertical slices with both points
outside the window contributes identically to both sets.  Only pairs with one
point in the window are summed, so neither (infinite) perimeter is formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discrete import SegmentMesh, build_pair_rule, graded_nodes
from .errors import GraphsDifferOutsideWindow, NonconvergedQuadrature, WindowTooShort
from .kernel import PiecewiseLinear, QuadratureSpec, as_order
from .model import GridFunction


@dataclass(frozen=True)
class EnergyWindow:
    a: float
    b: float
    L: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("window needs a < b")
        if not self.L > 0:
            raise ValueError("window height L must be positive")

    def shifted(self, dx: float) -> "EnergyWindow":
        return EnergyWindow(self.a + dx, self.b + dx, self.L)


def _as_graph(u) -> PiecewiseLinear:
    g = u.to_piecewise() if isinstance(u, GridFunction) else u
    if not g.has_constant_tails:
        raise ValueError("graphs must have constant tails")
    return g


def _window_mesh(knots: np.ndarray, w: EnergyWindow, pieces: int = 32) -> SegmentMesh:
    inner = knots[(knots > w.a) & (knots < w.b)]
    step = (w.b - w.a) / pieces
    fill = np.linspace(w.a, w.b, pieces + 1)
    x_in = np.unique(np.concatenate((fill, inner)))
    h0 = float(np.min(np.diff(x_in)))
    h0 = max(h0, step / 4)
    lo = min(float(knots.min()), w.a - step)
    hi = max(float(knots.max()), w.b + step)
    left = graded_nodes(w.a, h0, lo, knots=knots[knots < w.a])[1:]
    right = graded_nodes(w.b, h0, hi, knots=knots[knots > w.b])[1:]
    x = np.concatenate((left[::-1], x_in, right))
    x = x[np.concatenate(([True], np.diff(x) > 1e-12 * max(1.0, np.max(np.abs(x)))))]
    mid = 0.5 * (x[:-1] + x[1:])
    return SegmentMesh(x, (mid > w.a) & (mid < w.b))


def _check_agree(gu: PiecewiseLinear, gv: PiecewiseLinear, w: EnergyWindow, tol: float):
    pts = np.unique(np.concatenate((gu.knots, gv.knots, [w.a, w.b])))
    out = pts[(pts <= w.a) | (pts >= w.b)]
    gap = np.abs(gu(out) - gv(out))
    if out.size and np.max(gap) > tol:
        bad = out[int(np.argmax(gap))]
        raise GraphsDifferOutsideWindow(f"graphs differ by {np.max(gap):.3e} at x = {bad}")


def _check_height(gu, gv, w: EnergyWindow):
    sup = max(gu.sup_on(w.a, w.b), gv.sup_on(w.a, w.b))
    if not w.L > sup:
        raise WindowTooShort(f"L = {w.L} does not exceed sup |u|, |v| = {sup}")


def _same_layout(u, v) -> bool:
    return (isinstance(u, GridFunction) and isinstance(v, GridFunction)
            and u.n_nodes == v.n_nodes and u.d == v.d and u.datum == v.datum)


def energy_delta(u, v, w: EnergyWindow, order, q: QuadratureSpec | None = None,
                 return_error: bool = False):
    """``Per_s(E_u, Omega_L) - Per_s(E_v, Omega_L)``.

    ``u`` and ``v`` are ``GridFunction`` or constant-tail ``PiecewiseLinear``
    graphs.  The error estimate is the change under a rule two Gauss orders
    higher.  With ``q`` given, ``NonconvergedQuadrature`` is raised when it
    exceeds ``1e3 max(abs_tol, rel_tol |delta|)``; the fixed-order pair rule
    is not adaptive, hence the wider gate.
    """
    s = as_order(order).s
    gu, gv = _as_graph(u), _as_graph(v)
    _check_agree(gu, gv, w, 1e-13 * max(1.0, w.L))
    _check_height(gu, gv, w)
    if _same_layout(u, v):
        wu, wv = u.full_values(), v.full_values()
        if np.array_equal(wu, wv):
            return (0.0, 0.0) if return_error else 0.0
        r0, r2 = u.pair_rule(s), u.pair_rule(s, 2)
    else:
        knots = np.unique(np.concatenate((gu.knots, gv.knots)))
        mesh = _window_mesh(knots, w)
        wu, wv = gu(mesh.x), gv(mesh.x)
        if np.array_equal(wu, wv):
            return (0.0, 0.0) if return_error else 0.0
        r0, r2 = build_pair_rule(mesh, s), build_pair_rule(mesh, s, 2)
    val = r0.energy_difference(wu, wv)
    err = abs(r2.energy_difference(wu, wv) - val)
    if q is not None and err > 1e3 * max(q.abs_tol, q.rel_tol * abs(val)):
        raise NonconvergedQuadrature(f"energy difference error {err:.3e} for value {val:.3e}")
    return (val, err) if return_error else val
