"""Executable checks of the barrier inequalities behind the stickiness bound.

Every check returns an ``IneqReport`` with a signed margin (positive means
satisfied), never a bare boolean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, EnvelopeViolated
from .kernel import QuadratureSpec, _check_error, _quad, g_profile
from .model import ExteriorDatum, Params, eval_datum

_RELATIONS = ("<", "<=", "=", ">", ">=")


@dataclass(frozen=True)
class IneqReport:
    name: str
    lhs: float
    rhs: float
    relation: str
    margin: float
    tolerance: float
    passed: bool

    @classmethod
    def build(cls, name: str, lhs: float, rhs: float, relation: str, tolerance: float = 0.0,
              require: bool = True) -> "IneqReport":
        """Margin is ``rhs - lhs`` for ``<``/``<=``, ``lhs - rhs`` for ``>``/``>=``, ``-|lhs - rhs|`` for ``=``."""
        if relation not in _RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        if relation in ("<", "<="):
            margin = rhs - lhs
        elif relation in (">", ">="):
            margin = lhs - rhs
        else:
            margin = -abs(lhs - rhs)
        ok = margin > -tolerance if relation in ("<", ">") else margin >= -tolerance
        return cls(name, float(lhs), float(rhs), relation, float(margin), float(tolerance),
                   bool(ok and require))


def check_ks_geop(p: Params) -> IneqReport:
    """Geometric admissibility: ``h^{2+s}/(h^2+2)^{(2+s)/2} > 2 cbar/((1+s)(d-d0)^{1+s})``."""
    return IneqReport.build("ks_geop", p.a_factor, p.b_factor, ">")


def _kernel_to_d0(p: Params, x):
    return np.abs(p.d0 - p.d - x) ** (-(2.0 + p.s.s))


def _bump_pieces(u0: ExteriorDatum):
    """``(a, b, height)`` per linear piece; the indicator's open-interval endpoints are skipped."""
    if u0.ramp_width == 0:
        c = u0.height
        return [(u0.bump_lo, u0.bump_hi, lambda x: c)]
    k = u0.knots()
    return [(a, b, lambda x, a=a, b=b: float(eval_datum(u0, min(max(x, a), b))))
            for a, b in zip(k[:-1], k[1:])]


def datum_mass_integral(u0: ExteriorDatum, p: Params, q: QuadratureSpec | None = None) -> float:
    """``int_{-inf}^{-d-h} u0(x) / |d0 - d - x|^{2+s} dx`` over the bump."""
    q = q or QuadratureSpec()
    if u0.bump_hi + u0.ramp_width > -p.d - p.h:
        raise DomainViolation("datum support must lie in (-inf, -d-h)")
    if u0.height == 0:
        return 0.0
    total, err = 0.0, 0.0
    for a, b, height in _bump_pieces(u0):
        v, e = _quad(lambda x: height(x) * float(_kernel_to_d0(p, x)), a, b, q, q.abs_tol)
        total += v
        err += e
    _check_error(total, err, q, "datum mass integral")
    return total


def b_tail_integral(p: Params, q: QuadratureSpec | None = None) -> IneqReport:
    """``int_0^inf dx / (x + d - d0)^{2+s}`` against ``1/((1+s)(d-d0)^{1+s})``."""
    q = q or QuadratureSpec()
    s = p.s.s
    c = p.d - p.d0
    v, e = _quad(lambda x: (x + c) ** (-2.0 - s), 0.0, np.inf, q, q.abs_tol)
    _check_error(v, e, q, "tail integral")
    exact = 1.0 / ((1 + s) * c ** (1 + s))
    return IneqReport.build("b_tail_closed_form", v, exact, "=", tolerance=max(e, q.rel_tol * exact))


def _check_p(p: Params, pt_p: float):
    if not (-p.d <= pt_p <= -p.d + p.d0):
        raise DomainViolation(f"p = {pt_p} outside [-d, -d+d0] = [{-p.d}, {-p.d + p.d0}]")


def bump_b_bound(p: Params, pt_p: float, q: QuadratureSpec | None = None, pt_q: float = 0.0) -> IneqReport:
    """Interaction of ``P`` with the removed strip ``(0, inf) x (-cbar eta, 0)`` against its closed-form bound.

    The y-integral is exact through the profile ``G``; the x-integral is
    adaptive on ``(0, inf)``.
    """
    q = q or QuadratureSpec()
    _check_p(p, pt_p)
    s = p.s.s
    c = p.plateau_height
    rhs = c / ((1 + s) * (p.d - p.d0) ** (1 + s))
    if c == 0:
        return IneqReport.build("b_bound", 0.0, rhs, "<=")

    def f(x):
        r = x - pt_p
        return r ** (-1.0 - s) * (float(g_profile(-pt_q / r, s)) - float(g_profile((-c - pt_q) / r, s)))

    v, e = _quad(f, 0.0, np.inf, q, q.abs_tol)
    _check_error(v, e, q, "B bound")
    return IneqReport.build("b_bound", v, rhs, "<=", tolerance=e + q.rel_tol * rhs)


def _a_region_integral(p: Params, pt, u0: ExteriorDatum, q: QuadratureSpec):
    """``int_A |X - P|^{-(2+s)} dX`` over ``A = {0 < y < u0(x), x < -d}``; y done exactly via ``G``."""
    s = p.s.s
    pp, pq = pt
    total, err = 0.0, 0.0
    for a, b, height in _bump_pieces(u0):

        def f(x):
            r = pp - x
            hgt = max(height(x), 0.0)
            return r ** (-1.0 - s) * (float(g_profile((hgt - pq) / r, s)) - float(g_profile(-pq / r, s)))

        v, e = _quad(f, a, b, q, q.abs_tol)
        total += v
        err += e
    _check_error(total, err, q, "A region integral")
    return total, err


def bump_a_lower(p: Params, pt, u0: ExteriorDatum, q: QuadratureSpec | None = None) -> IneqReport:
    """Interaction of ``P`` with the region under the bump against ``a_factor * datum_mass_integral``.

    The envelope ``|X - P| <= |x - p| sqrt((h^2+2)/h^2)`` needs
    ``|y - q|^2 <= 2``, so ``EnvelopeViolated`` is raised when
    ``sup|u0| + |q| > sqrt(2)``.
    """
    q = q or QuadratureSpec()
    pp, pq = float(pt[0]), float(pt[1])
    _check_p(p, pp)
    if math.isfinite(p.delta) and abs(pq) > p.delta * (1 + 1e-12):
        raise DomainViolation(f"|q| = {abs(pq)} exceeds delta = {p.delta}")
    if u0.sup_norm + abs(pq) > math.sqrt(2.0):
        raise EnvelopeViolated(f"sup|u0| + |q| = {u0.sup_norm + abs(pq)} > sqrt(2)")
    mass = datum_mass_integral(u0, p, q)
    rhs = p.a_factor * mass
    if u0.height <= 0:
        return IneqReport.build("a_lower", 0.0, rhs, ">=")
    lhs, err = _a_region_integral(p, (pp, pq), u0, q)
    return IneqReport.build("a_lower", lhs, rhs, ">=", tolerance=err + q.rel_tol * abs(rhs))


def distance_envelope(p: Params, pt, u0: ExteriorDatum, n: int = 100, seed: int = 0) -> IneqReport:
    """Largest ``|X - P| / |x - p|`` over ``n`` random ``X`` in the bump region against ``sqrt((h^2+2)/h^2)``."""
    rng = np.random.default_rng(seed)
    pp, pq = float(pt[0]), float(pt[1])
    k = u0.knots()
    lo, hi = (u0.bump_lo, u0.bump_hi) if u0.ramp_width == 0 else (k[0], k[-1])
    bound = math.sqrt((p.h ** 2 + 2) / p.h ** 2)
    if u0.height <= 0:
        return IneqReport.build("distance_envelope", 1.0, bound, "<=")
    x = rng.uniform(lo, hi, n)
    top = np.maximum(np.asarray(eval_datum(u0, x)), 0.0)
    keep = top > 0
    x, y = x[keep], rng.uniform(0.0, 1.0, int(keep.sum())) * top[keep]
    ratio = np.hypot(x - pp, y - pq) / np.abs(x - pp)
    worst = float(ratio.max()) if ratio.size else 1.0
    return IneqReport.build("distance_envelope", worst, bound, "<=")


def net_curvature_margin(p: Params, q: QuadratureSpec | None = None, delta: float | None = None) -> IneqReport:
    """Barrier curvature sign with ``cstar = 4 C / theta``.

    lhs is ``C delta + 2 cbar cstar delta/((1+s)(d-d0)^{1+s}) - cstar h^{2+s} delta/(h^2+2)^{(2+s)/2}``,
    rhs is ``-cstar theta delta / 2``; the slack is exactly ``C delta``.
    Fails whenever ``theta <= 0``: no positive ``cstar`` works then, and
    ``4 C / |theta|`` is used only to report a margin.
    """
    c = p.barrier_const
    theta = p.theta
    dl = p.delta if delta is None else float(delta)
    if theta > 0:
        cstar = p.cstar
    else:
        cstar = 4 * c / abs(theta) if theta != 0 else math.inf
        if delta is None:
            dl = p.eta / cstar if math.isfinite(cstar) else 0.0
    lhs = c * dl + p.b_factor * cstar * dl - cstar * p.a_factor * dl
    rhs = -cstar * theta * dl / 2
    tol = 64 * np.finfo(float).eps * max(abs(lhs), abs(rhs), c * dl)
    return IneqReport.build("net_curvature_margin", lhs, rhs, "<=", tolerance=tol, require=theta > 0)


def reflect_tilde(X, p: float, up: float):
    """``(x, y) -> (-x, 2 up - y)``; vectorized over leading axes."""
    X = np.asarray(X, dtype=float)
    return np.stack((-X[..., 0], 2.0 * up - X[..., 1]), axis=-1)


def reflect_gap(X, P) -> np.ndarray:
    """``|X~ - P|^2 - |X - P|^2``, which equals ``4 x p``."""
    X = np.asarray(X, dtype=float)
    p, up = float(P[0]), float(P[1])
    Xt = reflect_tilde(X, p, up)
    d1 = (Xt[..., 0] - p) ** 2 + (Xt[..., 1] - up) ** 2
    d0 = (X[..., 0] - p) ** 2 + (X[..., 1] - up) ** 2
    return d1 - d0


def check_reflect(X, P):
    """``|X~ - P| <= |X - P|``; holds for ``x >= 0`` when ``p <= 0``."""
    p = float(P[0])
    if p > 0:
        raise DomainViolation("reflection check needs p <= 0")
    out = reflect_gap(X, P) <= 0.0
    return bool(out) if np.ndim(out) == 0 else out
