"""Fractional perimeter of subgraphs of piecewise-linear functions on a segment mesh.

For graphs, integrating the interaction of two vertical slices at ``x`` and
``x'`` over ``y`` in closed form leaves the energy

    E[w] = int int F((w(x) - w(x')) / |x - x'|) |x - x'|^{-s} dx dx',

summed over pairs with at least one point in the active window (pairs with
both points outside never change).  ``F`` is the even antiderivative of the
curvature profile ``G``, so ``dE/dw_j = int phi_j H[w]`` with ``H`` the
nonlocal mean curvature: the gradient is the Galerkin residual.

Every quadrature point is stored in the common form
``weight * F(delta / r) * r^{-s}`` where ``delta`` is a fixed linear
combination of four nodal values.  Energy, gradient and Hessian are then one
gather, one vectorized profile evaluation and one scatter.

Pair classes:
  * same segment: closed form, ``F(m) 2 h^{2-s} / ((1-s)(2-s))``;
  * segments sharing a node: Duffy split ``a = rho lam, b = rho (1-lam)``,
    the ``rho`` integral in closed form, Gauss-Legendre in ``lam``;
  * separated segments: tensor Gauss-Legendre, order by separation ratio;
  * active segment against a constant tail: ``x' - x = r0 / v`` and
    Gauss-Jacobi with weight ``v^s``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .kernel import f_profile, f_second, g_profile


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _gauss_jacobi_vs(n: int, s: float):
    """Nodes/weights on [0, 1] for int g(v) v^s dv."""
    x, w = special.roots_jacobi(n, 0.0, s)
    return 0.5 * (x + 1.0), w * 2.0 ** (-1.0 - s)


def _order_for_ratio(ratio, boost: int = 0):
    q = np.full(np.shape(ratio), 3, dtype=int)
    q[ratio < 8.0] = 4
    q[ratio < 3.0] = 6
    q[ratio < 1.5] = 8
    q[ratio < 0.75] = 12
    q[ratio < 0.3] = 20
    return q + boost


@dataclass(frozen=True)
class SegmentMesh:
    """Nodes ``x`` (increasing) and an ``active`` flag per segment.

    Outside ``[x[0], x[-1]]`` the function is constant, equal to the end
    values (inactive tails).
    """

    x: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        a = np.asarray(self.active, dtype=bool)
        if x.ndim != 1 or a.shape != (x.size - 1,) or np.any(np.diff(x) <= 0):
            raise ValueError("mesh nodes must increase and active must have one flag per segment")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "active", a)

    @property
    def n_nodes(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class PairRule:
    idx: np.ndarray   # (M, 4) node indices
    coef: np.ndarray  # (M, 4)
    weight: np.ndarray
    r: np.ndarray
    s: float
    n_nodes: int

    def delta(self, w):
        return np.einsum("ij,ij->i", self.coef, w[self.idx])

    def energy(self, w) -> float:
        rho = self.delta(w) / self.r
        return float(np.sum(self.weight * f_profile(rho, self.s) * self.r ** (-self.s)))

    def energy_difference(self, w1, w2) -> float:
        """``energy(w1) - energy(w2)`` summed termwise, without forming either total."""
        scale = self.weight * self.r ** (-self.s)
        diff = f_profile(self.delta(w1) / self.r, self.s) - f_profile(self.delta(w2) / self.r, self.s)
        return float(np.sum(scale * diff))

    def gradient(self, w) -> np.ndarray:
        rho = self.delta(w) / self.r
        c = self.weight * g_profile(rho, self.s) * self.r ** (-1.0 - self.s)
        return np.bincount(self.idx.ravel(), (c[:, None] * self.coef).ravel(), minlength=self.n_nodes)

    def energy_and_gradient(self, w):
        rho = self.delta(w) / self.r
        e = float(np.sum(self.weight * f_profile(rho, self.s) * self.r ** (-self.s)))
        c = self.weight * g_profile(rho, self.s) * self.r ** (-1.0 - self.s)
        g = np.bincount(self.idx.ravel(), (c[:, None] * self.coef).ravel(), minlength=self.n_nodes)
        return e, g

    def hessian(self, w) -> np.ndarray:
        rho = self.delta(w) / self.r
        c = self.weight * f_second(rho, self.s) * self.r ** (-2.0 - self.s)
        n = self.n_nodes
        out = np.zeros(n * n)
        for a in range(4):
            for b in range(4):
                flat = self.idx[:, a] * n + self.idx[:, b]
                out += np.bincount(flat, c * self.coef[:, a] * self.coef[:, b], minlength=n * n)
        return out.reshape(n, n)


def build_pair_rule(mesh: SegmentMesh, s: float, boost: int = 0) -> PairRule:
    """Quadrature points for the energy of ``mesh`` at order ``s``.

    ``boost`` raises every Gauss order; comparing rules with different boosts
    gives the quadrature error estimate.
    """
    x = mesh.x
    n = x.size
    nseg = n - 1
    h = np.diff(x)
    act = mesh.active
    idx_parts, coef_parts, w_parts, r_parts = [], [], [], []

    def push(idx, coef, wt, r):
        idx_parts.append(np.asarray(idx, dtype=np.int64).reshape(-1, 4))
        coef_parts.append(np.asarray(coef, dtype=float).reshape(-1, 4))
        w_parts.append(np.asarray(wt, dtype=float).ravel())
        r_parts.append(np.asarray(r, dtype=float).ravel())

    # same segment
    k = np.flatnonzero(act)
    z = np.zeros_like(k)
    push(np.stack([k + 1, k, z, z], 1),
         np.stack([np.ones(k.size), -np.ones(k.size), np.zeros(k.size), np.zeros(k.size)], 1),
         2.0 * h[k] ** 2 / ((1.0 - s) * (2.0 - s)), h[k])

    # adjacent segments (k-1, k) sharing node j = k
    j = np.arange(1, nseg)
    j = j[act[j - 1] | act[j]]
    if j.size:
        h1, h2 = h[j - 1], h[j]
        split = h1 / (h1 + h2)
        nl = 10 + boost
        lam_n, lam_w = _gauss(nl)
        for lo_frac, hi_frac in ((0.0, 1.0), (1.0, 2.0)):
            # first panel [0, split], second [split, 1]
            if lo_frac == 0.0:
                lam = split[:, None] * lam_n[None, :]
                dl = split[:, None] * lam_w[None, :]
            else:
                lam = split[:, None] + (1.0 - split)[:, None] * lam_n[None, :]
                dl = (1.0 - split)[:, None] * lam_w[None, :]
            rmax = np.minimum(h1[:, None] / np.maximum(lam, 1e-300), h2[:, None] / np.maximum(1.0 - lam, 1e-300))
            wt = 2.0 * dl * rmax ** (2.0 - s) / (2.0 - s)
            jj = np.broadcast_to(j[:, None], lam.shape)
            a1 = lam / h1[:, None]
            a2 = (1.0 - lam) / h2[:, None]
            push(np.stack([jj, jj - 1, jj + 1, jj], -1), np.stack([-a1, a1, -a2, a2], -1), wt, np.ones_like(wt))

    # separated segments: all k < l with l >= k + 2 and at least one active
    kk, ll = np.triu_indices(nseg, k=2)
    keep = act[kk] | act[ll]
    kk, ll = kk[keep], ll[keep]
    gap = x[ll] - x[kk + 1]
    ratio = gap / np.maximum(h[kk], h[ll])
    qs = _order_for_ratio(ratio, boost)
    for qn in np.unique(qs):
        sel = qs == qn
        a, b = kk[sel], ll[sel]
        t, tw = _gauss(int(qn))
        xa = x[a][:, None, None] + h[a][:, None, None] * t[None, :, None]
        xb = x[b][:, None, None] + h[b][:, None, None] * t[None, None, :]
        r = xb - xa
        wt = 2.0 * (h[a] * h[b])[:, None, None] * tw[None, :, None] * tw[None, None, :]
        shape = r.shape
        la = np.broadcast_to(t[None, :, None], shape)
        lb = np.broadcast_to(t[None, None, :], shape)
        ia = np.broadcast_to(a[:, None, None], shape)
        ib = np.broadcast_to(b[:, None, None], shape)
        push(np.stack([ia, ia + 1, ib, ib + 1], -1), np.stack([1 - la, la, -(1 - lb), -lb], -1), wt, r)

    # active segments against the two constant tails
    nv = 12 + boost
    v, vw = _gauss_jacobi_vs(nv, s)
    k = np.flatnonzero(act)
    for side in (1, -1):
        end = x[-1] if side == 1 else x[0]
        tail_node = n - 1 if side == 1 else 0
        near = (end - x[k + 1]) if side == 1 else (x[k] - end)
        qs = _order_for_ratio(near / h[k], boost)
        for qn in np.unique(qs):
            a = k[qs == qn]
            t, tw = _gauss(int(qn))
            xa = x[a][:, None, None] + h[a][:, None, None] * t[None, :, None]
            r0 = side * (end - xa)
            r = r0 / v[None, None, :]
            wt = 2.0 * h[a][:, None, None] * tw[None, :, None] * vw[None, None, :] * v ** (-2.0 - s) * r0
            shape = r.shape
            la = np.broadcast_to(t[None, :, None], shape)
            ia = np.broadcast_to(a[:, None, None], shape)
            it = np.full(shape, tail_node)
            push(np.stack([ia, ia + 1, it, it], -1),
                 np.stack([1 - la, la, -np.ones(shape), np.zeros(shape)], -1), wt, r)

    return PairRule(
        idx=np.concatenate(idx_parts), coef=np.concatenate(coef_parts),
        weight=np.concatenate(w_parts), r=np.concatenate(r_parts), s=float(s), n_nodes=n,
    )


def graded_nodes(start: float, step0: float, stop: float, knots=(), growth: float = 0.25) -> np.ndarray:
    """Nodes from ``start`` outward to at least ``stop`` (either direction).

    Spacing is ``max(step0, growth * distance from start)``; the given
    ``knots`` are inserted and nodes closer than ``step0/4`` to a knot dropped.
    """
    direction = 1.0 if stop >= start else -1.0
    span = abs(stop - start)
    pts = [0.0]
    while pts[-1] < span:
        pts.append(pts[-1] + max(step0, growth * pts[-1]))
    pts = np.asarray(pts)
    kn = np.asarray([abs(k - start) for k in knots if 0 < direction * (k - start)], dtype=float)
    if kn.size:
        keep = np.min(np.abs(pts[:, None] - kn[None, :]), axis=1) > 0.25 * step0
        keep[0] = True
        pts = np.unique(np.concatenate((pts[keep], kn)))
    return start + direction * pts
