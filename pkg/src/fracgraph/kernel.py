"""Fractional interaction kernel and nonlocal mean curvature.

Conventions
-----------
The interaction kernel is ``|X - Y|^{-(2+s)}`` on the plane.  For a set ``E``
and a point ``P`` on its boundary the nonlocal mean curvature is the
principal value

    H_s[E](P) = PV int (chi_{E^c}(X) - chi_E(X)) |X - P|^{-(2+s)} dX.

Slicing the plane vertically and integrating in ``y`` in closed form reduces
every quantity here to one-dimensional integrals of the profile

    G(rho) = int_0^rho (1 + tau^2)^{-(2+s)/2} dtau,

which equals ``1/2 B(1/2, (1+s)/2) I_{rho^2/(1+rho^2)}(1/2, (1+s)/2)`` with
``I`` the regularized incomplete beta function.  For the subgraph of ``u`` at
``P = (x0, u(x0))``:

    H(x0) = 2 PV int G((u(x0) - u(x0 + t)) / |t|) |t|^{-(1+s)} dt.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import (
    InvalidRegion,
    NonconvergedQuadrature,
    OverlappingRegions,
    PointNotOnBoundary,
)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FracOrder:
    s: float

    def __post_init__(self):
        s = float(self.s)
        if not (0.0 < s < 1.0) or not math.isfinite(s):
            raise ValueError(f"fractional order must lie strictly in (0, 1), got {self.s!r}")
        object.__setattr__(self, "s", s)


def as_order(order) -> FracOrder:
    return order if isinstance(order, FracOrder) else FracOrder(order)


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    tail_radius: float = 50.0
    singular_width: float = 1e-3
    limit: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("rel_tol and abs_tol must be positive")
        if not (self.tail_radius > self.singular_width > 0):
            raise ValueError("need tail_radius > singular_width > 0")


# ---------------------------------------------------------------------------
# profiles


@lru_cache(maxsize=None)
def g_infinity(s: float) -> float:
    """Limit of G(rho) as rho -> +inf."""
    return 0.5 * special.beta(0.5, 0.5 * (1.0 + s))


def g_profile(rho, order):
    """G(rho) = int_0^rho (1 + tau^2)^{-(2+s)/2} dtau, vectorized and odd."""
    s = as_order(order).s
    rho = np.asarray(rho, dtype=float)
    a, b = 0.5, 0.5 * (1.0 + s)
    r = np.abs(rho)
    out = np.empty_like(r)
    small = r <= 1.0
    rs = r[small]
    out[small] = special.betainc(a, b, rs * rs / (1.0 + rs * rs))
    rl = r[~small]
    # complement form keeps relative accuracy of G(inf) - G(rho) for large rho
    out[~small] = 1.0 - special.betainc(b, a, 1.0 / (1.0 + rl * rl))
    out *= g_infinity(s)
    tiny = r < _SERIES_CUT
    out[tiny] = _g_series(r[tiny], s)
    out *= np.sign(rho)
    return out if out.ndim else float(out)


# betainc loses relative accuracy once rho^2 underflows; the series error is O(rho^7)
_SERIES_CUT = 1e-3


def _g_series(r, s):
    r2 = r * r
    return r * (1.0 - (2.0 + s) / 6.0 * r2 + (2.0 + s) * (4.0 + s) / 40.0 * r2 * r2)


def f_profile(rho, order):
    """F(rho) = int_0^rho G, the even energy density with F'' = (1+rho^2)^{-(2+s)/2}."""
    s = as_order(order).s
    rho = np.asarray(rho, dtype=float)
    tail = -np.expm1(-0.5 * s * np.log1p(rho * rho)) / s
    out = rho * g_profile(rho, s) - tail
    return out if np.ndim(out) else float(out)


def f_second(rho, order):
    s = as_order(order).s
    rho = np.asarray(rho, dtype=float)
    return (1.0 + rho * rho) ** (-0.5 * (2.0 + s))


def _g_scalar(rho: float, s: float) -> float:
    a, b = 0.5, 0.5 * (1.0 + s)
    r = abs(rho)
    if r < _SERIES_CUT:
        return math.copysign(float(_g_series(r, s)), rho) if rho != 0 else 0.0
    if r <= 1.0:
        val = special.betainc(a, b, r * r / (1.0 + r * r))
    else:
        val = 1.0 - special.betainc(b, a, 1.0 / (1.0 + r * r))
    return math.copysign(g_infinity(s) * val, rho) if rho != 0 else 0.0


# ---------------------------------------------------------------------------
# graph evaluators


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function on R, extended linearly past the end knots.

    ``left_slope``/``right_slope`` are the tail slopes; zero gives constant
    tails.  Knots must be strictly increasing.
    """

    knots: np.ndarray
    values: np.ndarray
    left_slope: float = 0.0
    right_slope: float = 0.0

    def __post_init__(self):
        k = np.atleast_1d(np.asarray(self.knots, dtype=float))
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if k.shape != v.shape or k.ndim != 1 or k.size == 0:
            raise ValueError("knots and values must be equal-length 1D arrays")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        k.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    @classmethod
    def affine(cls, slope: float, intercept: float) -> "PiecewiseLinear":
        return cls(np.array([0.0]), np.array([intercept]), slope, slope)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k, v = self.knots, self.values
        y = np.interp(x, k, v)
        y = np.where(x < k[0], v[0] + self.left_slope * (x - k[0]), y)
        y = np.where(x > k[-1], v[-1] + self.right_slope * (x - k[-1]), y)
        return y if y.ndim else float(y)

    @property
    def has_constant_tails(self) -> bool:
        return self.left_slope == 0.0 and self.right_slope == 0.0

    def slopes_at(self, x0: float) -> tuple[float, float]:
        """(left, right) one-sided slopes at x0."""
        k, v = self.knots, self.values
        slopes = np.concatenate(([self.left_slope], np.diff(v) / np.diff(k), [self.right_slope]))
        i = np.searchsorted(k, x0, side="left")
        if i < k.size and k[i] == x0:
            return float(slopes[i]), float(slopes[i + 1])
        return float(slopes[i]), float(slopes[i])

    def reflected_odd(self) -> "PiecewiseLinear":
        """v(x) = -u(-x)."""
        return PiecewiseLinear(-self.knots[::-1], -self.values[::-1], self.right_slope, self.left_slope)

    def sup_on(self, a: float, b: float) -> float:
        pts = np.concatenate(([a, b], self.knots[(self.knots > a) & (self.knots < b)]))
        return float(np.max(np.abs(self(pts))))


# ---------------------------------------------------------------------------
# shared quadrature helpers


def _quad(f, a, b, q: QuadratureSpec, epsabs: float, epsrel: float | None = None):
    epsrel = q.rel_tol if epsrel is None else max(epsrel, 50 * EPS)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(
            f, a, b, epsabs=epsabs, epsrel=epsrel, limit=q.limit, full_output=1
        )[:3]
    # roundoff floor: quad's own estimate can undershoot on smooth pieces
    return val, err + 64 * EPS * abs(val)


def _check_error(value: float, err: float, q: QuadratureSpec, what: str):
    target = max(q.abs_tol, q.rel_tol * abs(value))
    if not err <= 10 * target:
        raise NonconvergedQuadrature(f"{what}: error estimate {err:.3e} exceeds target {target:.3e}")


# ---------------------------------------------------------------------------
# nonlocal mean curvature of a graph


def nmc_graph(u: PiecewiseLinear, x0: float, order, q: QuadratureSpec | None = None,
              return_error: bool = False):
    """Nonlocal mean curvature of the subgraph {y < u(x)} at (x0, u(x0)).

    The principal value is taken by pairing ``x0 + t`` with ``x0 - t``.  On
    the linear piece containing ``x0`` the paired integrand vanishes
    identically (G is odd), so integration starts at the nearest kink.  At a
    kink with unequal one-sided slopes the curvature is infinite and the
    signed infinity is returned.
    """
    s = as_order(order).s
    q = q or QuadratureSpec()
    x0 = float(x0)
    u0 = float(u(x0))
    sl, sr = u.slopes_at(x0)
    if sl != sr:
        val = math.copysign(math.inf, _g_scalar(sl, s) - _g_scalar(sr, s))
        return (val, 0.0) if return_error else val

    dist = np.abs(u.knots - x0)
    dist = np.unique(dist[dist > 0])
    knots, vals = u.knots, u.values
    lslope, rslope = u.left_slope, u.right_slope

    def uval(x):
        if x < knots[0]:
            return vals[0] + lslope * (x - knots[0])
        if x > knots[-1]:
            return vals[-1] + rslope * (x - knots[-1])
        return float(np.interp(x, knots, vals))

    def paired(t):
        return 2.0 * (_g_scalar((u0 - uval(x0 + t)) / t, s)
                      + _g_scalar((u0 - uval(x0 - t)) / t, s)) * t ** (-1.0 - s)

    if dist.size == 0:  # globally affine
        return (0.0, 0.0) if return_error else 0.0
    far = max(float(dist[-1]), q.tail_radius)
    cuts = np.concatenate((dist, [far])) if far > dist[-1] else dist
    npieces = cuts.size
    total, err = 0.0, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        v, e = _quad(paired, a, b, q, q.abs_tol / npieces)
        total += v
        err += e
    v, e = _quad(paired, far, np.inf, q, q.abs_tol / npieces)
    total += v
    err += e
    _check_error(total, err, q, f"nmc_graph at x0={x0}")
    return (total, err) if return_error else total


# ---------------------------------------------------------------------------
# rectangles and region sets


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]; bounds may be infinite."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise InvalidRegion(f"rectangle must have positive area: {self}")

    @property
    def bounded(self) -> bool:
        return all(math.isfinite(v) for v in (self.x0, self.x1, self.y0, self.y1))

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def translate(self, dx: float, dy: float) -> "Rect":
        return Rect(self.x0 + dx, self.x1 + dx, self.y0 + dy, self.y1 + dy)

    def contains(self, x: float, y: float) -> bool:
        return self.x0 < x < self.x1 and self.y0 < y < self.y1

    def interiors_intersect(self, other: "Rect") -> bool:
        return (min(self.x1, other.x1) > max(self.x0, other.x0)
                and min(self.y1, other.y1) > max(self.y0, other.y0))


@dataclass(frozen=True)
class RegionSet:
    """Subgraph of a piecewise-linear function, plus/minus finitely many rectangles."""

    graph: PiecewiseLinear
    added: tuple = field(default_factory=tuple)
    removed: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "added", tuple(self.added))
        object.__setattr__(self, "removed", tuple(self.removed))
        f = self.graph
        for r in self.added + self.removed:
            if not r.bounded:
                raise InvalidRegion("region rectangles must be bounded")
        for r in self.added:
            xs = self._probe_x(r)
            if np.any(r.y0 < f(xs) - 1e-14):
                raise InvalidRegion(f"added rectangle {r} intersects the subgraph")
        for r in self.removed:
            xs = self._probe_x(r)
            if np.any(r.y1 > f(xs) + 1e-14):
                raise InvalidRegion(f"removed rectangle {r} is not inside the subgraph")
        for group in (self.added, self.removed):
            for i, a in enumerate(group):
                for b in group[i + 1:]:
                    if a.interiors_intersect(b):
                        raise InvalidRegion("rectangles in one list must be disjoint")

    def _probe_x(self, r: Rect) -> np.ndarray:
        k = self.graph.knots
        return np.concatenate(([r.x0, 0.5 * (r.x0 + r.x1), r.x1], k[(k > r.x0) & (k < r.x1)]))

    def contains(self, x: float, y: float) -> bool:
        if any(r.contains(x, y) for r in self.added):
            return True
        if any(r.contains(x, y) for r in self.removed):
            return False
        return y < self.graph(x)

    def x_breakpoints(self) -> np.ndarray:
        edges = [r.x0 for r in self.added + self.removed] + [r.x1 for r in self.added + self.removed]
        return np.unique(np.concatenate((self.graph.knots, edges)))


def nmc_set_bruteforce(E: RegionSet, P: Sequence[float], order, q: QuadratureSpec | None = None,
                       return_error: bool = False):
    """Two-dimensional PV curvature integral of ``E`` at ``P``, slice by slice.

    Each vertical slice ``x = p + t`` contributes
    ``(2 G_inf - 2 sum_{intervals of E} [G(y1') - G(y0')]) |t|^{-(1+s)}`` with
    ``y' = (y - q)/|t|``; the subgraph part simplifies to ``-2 G((f - q)/|t|)``.
    Left and right halves are integrated separately outside the symmetric
    window ``|t| < singular_width`` and paired inside it.  ``P`` must lie on
    the graph part of the boundary, away from every rectangle.
    """
    s = as_order(order).s
    q = q or QuadratureSpec()
    p, qy = float(P[0]), float(P[1])
    w = q.singular_width
    if not (E.contains(p, qy - w) and not E.contains(p, qy + w)):
        raise PointNotOnBoundary(f"{P} is not on the boundary of the region")
    if abs(E.graph(p) - qy) > 1e-12 * max(1.0, abs(qy)):
        raise PointNotOnBoundary(f"{P} is not on the graph part of the boundary")
    for r in E.added + E.removed:
        if r.x0 - w <= p <= r.x1 + w and r.y0 - w <= qy <= r.y1 + w:
            raise PointNotOnBoundary(f"{P} touches rectangle {r}")
    sl, sr = E.graph.slopes_at(p)
    if sl != sr:
        val = math.copysign(math.inf, _g_scalar(sl, s) - _g_scalar(sr, s))
        return (val, 0.0) if return_error else val

    f = E.graph

    def rect_part(x, rt):
        acc = 0.0
        for r in E.removed:
            if r.x0 < x < r.x1:
                acc += 2.0 * (_g_scalar((r.y1 - qy) / rt, s) - _g_scalar((r.y0 - qy) / rt, s))
        for r in E.added:
            if r.x0 < x < r.x1:
                acc -= 2.0 * (_g_scalar((r.y1 - qy) / rt, s) - _g_scalar((r.y0 - qy) / rt, s))
        return acc

    def graph_part(x, rt):
        return -2.0 * _g_scalar((float(f(x)) - qy) / rt, s)

    def slice_full(t):
        rt = abs(t)
        x = p + t
        return (graph_part(x, rt) + rect_part(x, rt)) * rt ** (-1.0 - s)

    def paired_rects(t):
        return (rect_part(p + t, t) + rect_part(p - t, t)) * t ** (-1.0 - s)

    def paired_full(t):
        return slice_full(t) + slice_full(-t)

    bps = E.x_breakpoints() - p
    near = np.min(np.abs(bps)) if bps.size else math.inf
    w0 = min(w, near)
    pieces = []
    # (0, w0): locally a half-plane through P, graph part cancels exactly
    pieces.append((paired_rects, 0.0, w0))
    inner = np.unique(np.abs(bps[(np.abs(bps) > w0) & (np.abs(bps) < w)]))
    cuts = np.concatenate(([w0], inner, [w])) if w > w0 else np.array([w0])
    for a, b in zip(cuts[:-1], cuts[1:]):
        pieces.append((paired_full, a, b))
    far = max(q.tail_radius, float(np.max(np.abs(bps))) if bps.size else 0.0, 2 * w)
    right = np.unique(np.concatenate(([w, far], bps[(bps > w) & (bps < far)])))
    left = np.unique(np.concatenate(([-far, -w], bps[(bps < -w) & (bps > -far)])))
    for a, b in zip(right[:-1], right[1:]):
        pieces.append((slice_full, a, b))
    for a, b in zip(left[:-1], left[1:]):
        pieces.append((slice_full, a, b))
    pieces.append((slice_full, far, np.inf))
    pieces.append((slice_full, -np.inf, -far))

    total, err = 0.0, 0.0
    n = len(pieces)
    for fn, a, b in pieces:
        if b <= a:
            continue
        # unpaired halves near the window are large and cancel: ask for more digits
        v, e = _quad(fn, a, b, q, q.abs_tol / n, q.rel_tol * 1e-3)
        total += v
        err += e
    _check_error(total, err, q, f"nmc_set_bruteforce at P={tuple(P)}")
    return (total, err) if return_error else total


# ---------------------------------------------------------------------------
# interaction between rectangles


def _second_antiderivative(z, xi, s):
    """K2 with d^2/dz^2 K2 = (xi^2 + z^2)^{-(2+s)/2}, K2(0) = 0."""
    ax = abs(xi)
    return ax ** (-s) * f_profile(z / ax, s)


def _first_antiderivative(z, xi, s):
    ax = abs(xi)
    if math.isinf(z):
        return math.copysign(g_infinity(s), z) * ax ** (-1.0 - s)
    return ax ** (-1.0 - s) * _g_scalar(z / ax, s)


_GL8 = np.polynomial.legendre.leggauss(8)


def _psi(xi, A: Rect, B: Rect, s):
    """int_{A_y} int_{B_y} ((xi)^2 + (y - y')^2)^{-(2+s)/2} dy' dy, A_y bounded."""
    c0, c1, e0, e1 = A.y0, A.y1, B.y0, B.y1
    ax = abs(xi)
    ext = max(c1 - c0, (e1 - e0) if math.isfinite(e1 - e0) else math.inf)
    if math.isfinite(ext) and ax > 4.0 * ext + 4.0 * max(abs(c0 - e1), abs(c1 - e0)):
        # far field: the four-term antiderivative combination cancels badly
        nodes, wts = _GL8
        y = 0.5 * (c1 - c0) * (nodes + 1) + c0
        yp = 0.5 * (e1 - e0) * (nodes + 1) + e0
        k = (xi * xi + (y[:, None] - yp[None, :]) ** 2) ** (-0.5 * (2 + s))
        return 0.25 * (c1 - c0) * (e1 - e0) * float(wts @ k @ wts)
    total = 0.0
    for e, sign in ((e0, 1.0), (e1, -1.0)):
        # int_{c0}^{c1} K1(y - e) dy, with K1 the first antiderivative
        if math.isinf(e):
            total += sign * (c1 - c0) * _first_antiderivative(-e, xi, s)
        else:
            total += sign * (_second_antiderivative(c1 - e, xi, s) - _second_antiderivative(c0 - e, xi, s))
    return total


def interaction(A: Rect, B: Rect, order, q: QuadratureSpec | None = None,
                return_error: bool = False):
    """L_s(A, B) = int_A int_B |X - Y|^{-(2+s)} dX dY for rectangles with disjoint interiors.

    The y-integrals are done in closed form through the profiles; the two
    x-integrals collapse onto the offset ``xi = x' - x`` weighted by the
    overlap length of the x-intervals.  One of the rectangles must be bounded;
    the other may extend to infinity.
    """
    s = as_order(order).s
    q = q or QuadratureSpec()
    if A.interiors_intersect(B):
        raise OverlappingRegions(f"{A} and {B} overlap")
    if not A.bounded:
        A, B = B, A
    if not A.bounded:
        raise InvalidRegion("at least one rectangle must be bounded")
    a0, a1, b0, b1 = A.x0, A.x1, B.x0, B.x1

    def weight(xi):
        return max(0.0, min(a1, b1 - xi) - max(a0, b0 - xi))

    def integrand(xi):
        if xi == 0.0:
            return 0.0
        return weight(xi) * _psi(xi, A, B, s)

    lo, hi = b0 - a1, b1 - a0
    cuts = [c for c in (b0 - a0, b1 - a1, 0.0) if lo < c < hi and math.isfinite(c)]
    finite_pts = sorted(set([v for v in (lo, hi) if math.isfinite(v)] + cuts))
    segments = []
    if math.isinf(lo):
        segments.append((-np.inf, finite_pts[0]))
    segments.extend(zip(finite_pts[:-1], finite_pts[1:]))
    if math.isinf(hi):
        segments.append((finite_pts[-1], np.inf))
    total, err = 0.0, 0.0
    for a, b in segments:
        v, e = _quad(integrand, a, b, q, q.abs_tol / max(1, len(segments)))
        total += v
        err += e
    _check_error(total, err, q, "interaction")
    return (total, err) if return_error else total
