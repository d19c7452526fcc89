"""Discrete s-minimal graphs by residual descent on the graph energy.

The residual at node ``i`` is the hat-function average of the nonlocal mean
curvature, ``R_i = (1/dx) int phi_i H[u]``, which equals ``(1/dx) dE/du_i``.
The pointwise curvature is infinite at every kink of a piecewise-linear graph
with unequal slopes, so nodal values of ``H`` cannot serve as a residual.

Update: ``u <- u - tau P^{-1} R``.  With ``preconditioned`` on, ``P`` is the
energy Hessian at the flat graph (``F'' <= F''(0) = 1`` makes ``P`` a global
upper bound of the Hessian, so ``tau = 1`` never increases the energy).  With
it off, ``P`` is the identity and ``step0`` defaults to ``0.5 dx^{1+s}``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import PreconditionError, StalledStep
from .kernel import QuadratureSpec, as_order
from .model import GridFunction, Params

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    residual_tol: float = 1e-9
    max_iters: int = 5000
    step0: float | None = None
    step_shrink: float = 0.5
    odd_symmetrize: bool = True
    preconditioned: bool = True
    boundary_skip: int = 0  # nodes per side left out of the residual norm; >0 can stall plain descent

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.max_iters < 0 or self.boundary_skip < 0:
            raise ValueError("max_iters and boundary_skip must be nonnegative")
        if self.step0 is not None and not self.step0 > 0:
            raise ValueError("step0 must be positive")

    def initial_step(self, dx: float, s: float) -> float:
        if self.step0 is not None:
            return self.step0
        return 1.0 if self.preconditioned else 0.5 * dx ** (1 + s)


@dataclass(frozen=True)
class SolveReport:
    converged: bool
    iters: int
    final_residual: float
    residual_trace: np.ndarray
    solution: GridFunction
    boundary_residual: float = 0.0
    energy_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    quadrature_error: float = 0.0


def residual(u: GridFunction, order, q: QuadratureSpec | None = None) -> np.ndarray:
    """Hat-averaged curvature at each interior node."""
    s = as_order(order).s
    rule = u.pair_rule(s)
    g = rule.gradient(u.full_values())
    return g[u.layout().interior] / u.dx


def residual_error(u: GridFunction, order) -> np.ndarray:
    """Quadrature error estimate of ``residual``: difference to a rule two orders higher."""
    s = as_order(order).s
    w = u.full_values()
    idx = u.layout().interior
    return np.abs(u.pair_rule(s, 2).gradient(w)[idx] - u.pair_rule(s).gradient(w)[idx]) / u.dx


def _core(n: int, skip: int) -> slice:
    skip = min(skip, (n - 1) // 2)
    return slice(skip, n - skip)


def _symmetrize(v: np.ndarray) -> np.ndarray:
    return 0.5 * (v - v[::-1])


def _flat_preconditioner(u: GridFunction, s: float):
    rule = u.pair_rule(s)
    idx = u.layout().interior
    hess = rule.hessian(np.zeros(rule.n_nodes))[np.ix_(idx, idx)]
    return linalg.cho_factor(hess / u.dx)


def solve(u_init: GridFunction, cfg: SolveConfig = SolveConfig(), order=0.5,
          q: QuadratureSpec | None = None) -> SolveReport:
    s = as_order(order).s
    if not u_init.datum.continuous:
        raise PreconditionError("solver needs a continuous datum (ramp_width > 0)")
    sym = cfg.odd_symmetrize and u_init.datum.odd
    rule = u_init.pair_rule(s)
    lay = u_init.layout()
    idx = lay.interior
    dx = u_init.dx
    core = _core(u_init.n_nodes, cfg.boundary_skip)
    prec = _flat_preconditioner(u_init, s) if cfg.preconditioned else None
    step0 = cfg.initial_step(dx, s)

    def evaluate(v):
        e, g = rule.energy_and_gradient(lay.full(v))
        r = g[idx] / dx
        if sym:
            r = _symmetrize(r)
        return e, r

    v = np.array(u_init.values, dtype=float)
    if sym:
        v = _symmetrize(v)
    e, r = evaluate(v)
    sup = float(np.max(np.abs(r[core])))
    trace, energies = [sup], [e]
    tau = step0
    it = 0
    while sup > cfg.residual_tol and it < cfg.max_iters:
        direction = linalg.cho_solve(prec, r) if prec is not None else r
        while True:
            trial = v - tau * direction
            if sym:
                trial = _symmetrize(trial)
            e_t, r_t = evaluate(trial)
            sup_t = float(np.max(np.abs(r_t[core])))
            if sup_t <= sup:
                break
            tau *= cfg.step_shrink
            if tau < 1e-12 * step0:
                raise StalledStep(f"step underflow at iteration {it}, residual {sup:.3e}")
        v, e, r, sup = trial, e_t, r_t, sup_t
        trace.append(sup)
        energies.append(e)
        tau = min(step0, tau / cfg.step_shrink)
        it += 1
    sol = u_init.with_values(v)
    edge = np.ones(u_init.n_nodes, dtype=bool)
    edge[core] = False
    bres = float(np.max(np.abs(r[edge]))) if edge.any() else 0.0
    qerr = float(np.max(residual_error(sol, s)))
    log.info("solve: %d iterations, residual %.3e, boundary %.3e", it, sup, bres)
    return SolveReport(
        converged=sup <= cfg.residual_tol, iters=it, final_residual=sup,
        residual_trace=np.asarray(trace), solution=sol, boundary_residual=bres,
        energy_trace=np.asarray(energies), quadrature_error=qerr,
    )


def clamp_check(report: SolveReport, p: Params, slack: float | None = None) -> bool:
    """Whether the solution obeys ``|u| <= cbar * eta`` up to solver accuracy."""
    if slack is None:
        slack = report.final_residual * report.solution.dx + 1e-12
    return bool(np.max(np.abs(report.solution.values)) <= p.plateau_height + slack)
