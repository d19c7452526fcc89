"""Structural constants, the antisymmetric exterior datum and the discrete graph state."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .discrete import SegmentMesh, build_pair_rule, graded_nodes
from .errors import PreconditionError, RampTooWide
from .kernel import FracOrder, PiecewiseLinear, as_order


@dataclass(frozen=True)
class Params:
    """Structural constants of the stickiness construction.

    ``theta``, ``cstar`` and ``delta`` are derived, so ``dataclasses.replace``
    on a base field keeps them consistent.  ``cstar = 4 C / theta`` with ``C``
    the barrier error constant; it is ``nan`` when ``theta <= 0`` because no
    positive choice works then.
    """

    s: FracOrder
    epsilon0: float
    cbar: float
    d: float
    d0: float
    h: float
    eta: float
    d1: float
    d2: float
    barrier_const: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "s", as_order(self.s))
        if not self.epsilon0 > 0:
            raise ValueError("epsilon0 must be positive")
        if not self.cbar > 0:
            raise ValueError("cbar must be positive")
        if not (self.d > self.d0 > 0 and self.h > 0):
            raise ValueError("need d > d0 > 0 and h > 0")
        if not self.eta >= 0:
            raise ValueError("eta must be nonnegative")
        if not 0 <= self.d1 < self.d2:
            raise ValueError("need 0 <= d1 < d2")
        if not self.barrier_const > 0:
            raise ValueError("barrier_const must be positive")

    @property
    def a_factor(self) -> float:
        """Distance-envelope factor h^{2+s} / (h^2+2)^{(2+s)/2}."""
        s = self.s.s
        return self.h ** (2 + s) / (self.h ** 2 + 2) ** ((2 + s) / 2)

    @property
    def b_factor(self) -> float:
        """2 cbar / ((1+s)(d-d0)^{1+s})."""
        s = self.s.s
        return 2 * self.cbar / ((1 + s) * (self.d - self.d0) ** (1 + s))

    @property
    def theta(self) -> float:
        return self.a_factor - self.b_factor

    @property
    def cstar(self) -> float:
        return 4 * self.barrier_const / self.theta if self.theta > 0 else math.nan

    @property
    def delta(self) -> float:
        return self.eta / self.cstar

    @property
    def plateau_height(self) -> float:
        return self.cbar * self.eta

    def to_dict(self) -> dict:
        return {
            "s": self.s.s, "epsilon0": self.epsilon0, "cbar": self.cbar, "d": self.d,
            "d0": self.d0, "h": self.h, "eta": self.eta, "d1": self.d1, "d2": self.d2,
            "barrier_const": self.barrier_const, "theta": self.theta, "cstar": self.cstar,
        }


def paper_params(s, epsilon0: float = 0.1, eta: float = 0.1, barrier_const: float = 1.0) -> Params:
    """Explicit admissible preset: d0 = h = 1 and d chosen large enough for theta > 0."""
    order = as_order(s)
    sv = order.s
    return Params(
        s=order,
        epsilon0=epsilon0,
        cbar=2 ** (2 + sv) * (1 + sv),
        d=3 ** ((2 + sv) / (2 * (1 + sv))) * 2 ** ((3 + sv) / (1 + sv)) + 2,
        d0=1.0,
        h=1.0,
        eta=eta,
        d1=2 * ((10 / 9) ** (1 / (1 + sv)) - 1),
        d2=2 * (10 ** (1 / (1 + sv)) - 1),
        barrier_const=barrier_const,
    )


@dataclass(frozen=True)
class ExteriorDatum:
    """Trapezoidal bump on the negative side, optionally odd-extended.

    Plateau ``height`` on ``(bump_lo, bump_hi)`` with linear ramps of width
    ``ramp_width`` outside it.  ``ramp_width = 0`` is the indicator of the open
    plateau interval, which is discontinuous and refused by the solver.
    ``half_width`` is the window half-width ``d``; values inside ``(-d, d)``
    are not part of the datum and evaluate to the continuous extension.
    """

    bump_lo: float
    bump_hi: float
    height: float
    ramp_width: float = 0.0
    odd: bool = True
    half_width: float = 0.0

    def __post_init__(self):
        if not self.bump_lo < self.bump_hi:
            raise ValueError("bump_lo must be below bump_hi")
        if self.ramp_width < 0:
            raise ValueError("ramp_width must be nonnegative")
        if self.bump_hi + self.ramp_width > -self.half_width:
            raise RampTooWide("bump support must lie left of -d")

    @property
    def continuous(self) -> bool:
        return self.ramp_width > 0 or self.height == 0

    @property
    def sup_norm(self) -> float:
        return abs(self.height)

    def knots(self) -> np.ndarray:
        """Kinks of the datum on the negative side, increasing."""
        r = self.ramp_width
        return np.array([self.bump_lo - r, self.bump_lo, self.bump_hi, self.bump_hi + r])

    def _left(self, x):
        lo, hi, r, c = self.bump_lo, self.bump_hi, self.ramp_width, self.height
        if r == 0:
            return np.where((x > lo) & (x < hi), c, 0.0)
        y = np.interp(x, self.knots(), [0.0, c, c, 0.0])
        return y

    def __call__(self, x):
        return eval_datum(self, x)

    def to_dict(self) -> dict:
        return {"bump_lo": self.bump_lo, "bump_hi": self.bump_hi, "height": self.height,
                "ramp_width": self.ramp_width, "odd": self.odd, "half_width": self.half_width}


def eval_datum(u0: ExteriorDatum, x):
    """Datum value; odd symmetry ``eval(-x) = -eval(x)`` holds exactly."""
    x = np.asarray(x, dtype=float)
    left = u0._left(-np.abs(x))
    if u0.odd:
        y = np.where(x < 0, left, -left)
    else:
        y = np.where(x < 0, left, 0.0)
    y = y + 0.0  # normalizes -0.0
    return y if y.ndim else float(y)


def default_ramp_width(p: Params) -> float:
    """``0.05 (d2 - d1)`` capped at ``d1 / 2`` so the ramp stays left of ``-d-h``."""
    return min(0.05 * (p.d2 - p.d1), 0.5 * p.d1)


def paper_datum(p: Params, ramp_width: float | None = None, odd: bool = True) -> ExteriorDatum:
    """Bump of height ``cbar * eta`` on ``(-d-h-d2, -d-h-d1)``, ramps outward."""
    if ramp_width is None:
        ramp_width = default_ramp_width(p)
    if ramp_width < 0:
        raise ValueError("ramp_width must be nonnegative")
    lo = -p.d - p.h - p.d2
    hi = -p.d - p.h - p.d1
    if hi + ramp_width >= -p.d - p.h:
        raise RampTooWide(f"ramp_width {ramp_width} crosses -d-h (max {p.d1})")
    return ExteriorDatum(lo, hi, p.plateau_height, float(ramp_width), odd, p.d)


def zero_datum(d: float) -> ExteriorDatum:
    return ExteriorDatum(-d - 2.0, -d - 1.0, 0.0, 0.0, True, d)


def datum_graph(u0: ExteriorDatum) -> PiecewiseLinear:
    """The datum as a continuous piecewise-linear function on R."""
    if not u0.continuous:
        raise PreconditionError("indicator datum is discontinuous; use ramp_width > 0")
    k = u0.knots()
    ks = np.concatenate((k, -k[::-1]))
    return PiecewiseLinear(ks, eval_datum(u0, ks))


@dataclass(frozen=True)
class GraphLayout:
    """Segment mesh for a window problem.

    Interior nodes are uniform in ``(-d, d)``; the exterior is graded outward
    from ``+-d`` through every datum kink and mirrored so the mesh is
    symmetric.  Only window segments are active.
    """

    mesh: SegmentMesh
    interior: np.ndarray
    base: np.ndarray  # datum values at every mesh node, zero at interior nodes

    def full(self, values) -> np.ndarray:
        w = self.base.copy()
        w[self.interior] = values
        return w


@lru_cache(maxsize=16)
def graph_layout(u0: ExteriorDatum, d: float, n_nodes: int) -> GraphLayout:
    if not u0.continuous:
        raise PreconditionError("indicator datum is discontinuous; use ramp_width > 0")
    dx = 2 * d / (n_nodes + 1)
    k = u0.knots() if u0.height != 0 else np.array([])
    knots = np.concatenate((k, -k)) if k.size else k
    far = max(d + dx, float(np.max(np.abs(knots))) if knots.size else 0.0)
    left_knots = [-abs(v) for v in knots]
    left = graded_nodes(-d, dx, -far, knots=left_knots)
    inner = -d + dx * np.arange(1, n_nodes + 1)
    inner[n_nodes - 1 - np.arange(n_nodes // 2)] = -inner[np.arange(n_nodes // 2)]
    if n_nodes % 2:
        inner[n_nodes // 2] = 0.0
    x = np.concatenate((left[::-1], inner, -left))
    n_left = left.size
    interior = np.arange(n_left, n_left + n_nodes)
    active = np.zeros(x.size - 1, dtype=bool)
    active[n_left - 1:n_left + n_nodes] = True
    base = np.asarray(eval_datum(u0, x), dtype=float)
    base[interior] = 0.0
    base[n_left - 1] = float(eval_datum(u0, -d))
    base[n_left + n_nodes] = float(eval_datum(u0, d))
    return GraphLayout(SegmentMesh(x, active), interior, base)


@lru_cache(maxsize=8)
def _rule(u0: ExteriorDatum, d: float, n_nodes: int, s: float, boost: int):
    return build_pair_rule(graph_layout(u0, d, n_nodes).mesh, s, boost)


@dataclass(frozen=True)
class GridFunction:
    """Nodal values on ``x_i = -d + i dx``, ``i = 1..n_nodes``, ``dx = 2d/(n_nodes+1)``.

    Outside the window the graph is the datum; the end segments join the
    outermost nodes to the datum limits at ``+-d``.
    """

    n_nodes: int
    values: np.ndarray
    datum: ExteriorDatum
    d: float

    def __post_init__(self):
        if self.n_nodes < 3:
            raise ValueError("need at least 3 interior nodes")
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.n_nodes:
            raise ValueError("values must have one entry per interior node")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, n_nodes: int, datum: ExteriorDatum, d: float) -> "GridFunction":
        return cls(n_nodes, np.zeros(n_nodes), datum, d)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.n_nodes, values, self.datum, self.d)

    @property
    def dx(self) -> float:
        return 2 * self.d / (self.n_nodes + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.layout().mesh.x[self.layout().interior]

    def layout(self) -> GraphLayout:
        return graph_layout(self.datum, float(self.d), int(self.n_nodes))

    def pair_rule(self, s, boost: int = 0):
        return _rule(self.datum, float(self.d), int(self.n_nodes), as_order(s).s, int(boost))

    def full_values(self) -> np.ndarray:
        return self.layout().full(self.values)

    def to_piecewise(self) -> PiecewiseLinear:
        lay = self.layout()
        return PiecewiseLinear(lay.mesh.x, lay.full(self.values))

    def __call__(self, x):
        return self.to_piecewise()(x)

    def mirror_index(self) -> np.ndarray:
        return np.arange(self.n_nodes)[::-1]
