"""Command-line experiments: curvature evaluation, solves, the verifier suite, the sign-split experiment and the stickiness sweep.

Exit codes: 0 when every check passes, 1 when an assertion or report fails,
2 on errors (bad config, failed preconditions, solver failure).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import AssertionFailed, EnvelopeViolated, FracGraphError, PreconditionError, SolverFailed
from .kernel import QuadratureSpec, nmc_graph
from .model import ExteriorDatum, GridFunction, Params, paper_datum, paper_params
from .solver import SolveConfig, SolveReport, clamp_check, residual, solve
from .verify import (IneqReport, b_tail_integral, bump_a_lower, bump_b_bound, check_ks_geop,
                     datum_mass_integral, distance_envelope, net_curvature_margin, reflect_gap)

log = logging.getLogger("fracgraph")

MODES = ("nmc", "solve", "verify", "experiment-maxprinciple", "experiment-stickiness")
OUTPUT_ENV = "FRACGRAPH_OUTPUT_DIR"
_PARAM_OVERRIDES = ("cbar", "d", "d0", "h", "d1", "d2")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "verify"
    s: float = 0.5
    epsilon0: float = 0.1
    eta: float = 0.1
    barrier_const: float = 1.0
    param_overrides: dict = field(default_factory=dict)
    ramp_width: float | None = None
    datum_height: float | None = None  # None: plateau cbar * eta
    odd: bool = True
    n_nodes: int = 257
    quadrature: QuadratureSpec = QuadratureSpec()
    solve: SolveConfig = SolveConfig()
    eta_sweep: tuple = (0.2, 0.1, 0.05, 0.025)
    nmc_points: tuple = ()
    output_dir: str = "out"
    seed: int = 0
    plots: bool = False
    floor_slack: float = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        bad = set(self.param_overrides) - set(_PARAM_OVERRIDES)
        if bad:
            raise ValueError(f"unknown parameter overrides {sorted(bad)}")
        sweep = tuple(float(e) for e in self.eta_sweep)
        object.__setattr__(self, "eta_sweep", sweep)
        object.__setattr__(self, "nmc_points", tuple(float(x) for x in self.nmc_points))
        if self.mode == "experiment-stickiness":
            if not sweep or any(b >= a for a, b in zip(sweep, sweep[1:])):
                raise ValueError("eta_sweep must be nonempty and strictly decreasing")

    def params(self, eta: float | None = None) -> Params:
        p = paper_params(self.s, self.epsilon0, self.eta if eta is None else eta, self.barrier_const)
        return dataclasses.replace(p, **self.param_overrides) if self.param_overrides else p

    def datum(self, p: Params, ramp_width: float | None = None) -> ExteriorDatum:
        u0 = paper_datum(p, self.ramp_width if ramp_width is None else ramp_width, self.odd)
        if self.datum_height is not None:
            u0 = dataclasses.replace(u0, height=float(self.datum_height))
        return u0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "params": {"s": self.s, "epsilon0": self.epsilon0, "eta": self.eta,
                       "barrier_const": self.barrier_const, **self.param_overrides},
            "datum": {"ramp_width": self.ramp_width, "height": self.datum_height, "odd": self.odd},
            "grid": {"n_nodes": self.n_nodes},
            "quadrature": dataclasses.asdict(self.quadrature),
            "solve": dataclasses.asdict(self.solve),
            "eta_sweep": list(self.eta_sweep),
            "nmc_points": list(self.nmc_points),
            "output_dir": self.output_dir,
            "seed": self.seed,
            "plots": self.plots,
            "floor_slack": self.floor_slack,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw or {})
        known = {"mode", "params", "datum", "grid", "quadrature", "solve", "eta_sweep",
                 "nmc_points", "output_dir", "seed", "plots", "floor_slack"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        kw = {}
        params = dict(raw.get("params") or {})
        for key in ("s", "epsilon0", "eta", "barrier_const"):
            if key in params:
                kw[key] = float(params.pop(key))
        kw["param_overrides"] = {k: float(v) for k, v in params.items()}
        datum = dict(raw.get("datum") or {})
        if datum.get("ramp_width") is not None:
            kw["ramp_width"] = float(datum["ramp_width"])
        if datum.get("height") is not None:
            kw["datum_height"] = float(datum["height"])
        if "odd" in datum:
            kw["odd"] = bool(datum["odd"])
        if "n_nodes" in (raw.get("grid") or {}):
            kw["n_nodes"] = int(raw["grid"]["n_nodes"])
        if raw.get("quadrature"):
            kw["quadrature"] = QuadratureSpec(**raw["quadrature"])
        if raw.get("solve"):
            kw["solve"] = SolveConfig(**raw["solve"])
        for key in ("mode", "output_dir"):
            if key in raw:
                kw[key] = str(raw[key])
        for key in ("eta_sweep", "nmc_points"):
            if key in raw:
                kw[key] = tuple(raw[key])
        if "seed" in raw:
            kw["seed"] = int(raw["seed"])
        if "plots" in raw:
            kw["plots"] = bool(raw["plots"])
        if "floor_slack" in raw:
            kw["floor_slack"] = float(raw["floor_slack"])
        return cls(**kw)

    def content_hash(self) -> str:
        """Hash of every input that affects results; the output location is not one."""
        d = self.to_dict()
        del d["output_dir"]
        payload = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


# ---------------------------------------------------------------------------
# persistence


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, rows: list) -> None:
    """Rows are dataclass instances; the header is their field names."""
    if not rows:
        return
    names = [f.name for f in dataclasses.fields(rows[0])]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for r in rows:
            w.writerow([_cell(getattr(r, n)) for n in names])


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_summary(cfg: RunConfig, name: str, passed: bool, extra: dict) -> Path:
    out = Path(cfg.output_dir) / f"{name}_summary.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {"config": cfg.to_dict(), "input_hash": cfg.content_hash(), "passed": bool(passed),
           **_jsonable(extra)}
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return out


def _plot(path: Path, x, y, xlabel: str, ylabel: str, loglog: bool = False) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "fracgraph"
    fig, ax = plt.subplots(figsize=(6, 4))
    (ax.loglog if loglog else ax.plot)(x, y, marker="o" if loglog else None)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class NodeRow:
    x: float
    u: float
    residual: float
    odd_gap: float


@dataclass(frozen=True)
class NmcRow:
    x: float
    nmc: float
    error: float


@dataclass(frozen=True)
class StickinessRow:
    eta: float
    jump_proxy: float
    theoretical_floor: float
    sign_ok: bool
    odd_ok: bool
    residual: float
    min_left: float
    min_near: float
    floor_ok: bool
    converged: bool


@dataclass(frozen=True)
class MaxPrincipleReport:
    passed: bool
    tol_odd: float
    tol_sign: float
    odd_gap: float
    min_left: float
    max_right: float
    rows: list
    solve: SolveReport
    failure: str = ""


def _tol_odd(cfg: RunConfig) -> float:
    return 1e-8 if cfg.solve.odd_symmetrize else 1e-3


def _solve_datum(cfg: RunConfig, p: Params, u0: ExteriorDatum) -> SolveReport:
    u = GridFunction.zeros(cfg.n_nodes, u0, p.d)
    rep = solve(u, cfg.solve, p.s, cfg.quadrature)
    if not rep.converged:
        raise SolverFailed(f"no convergence after {rep.iters} iterations, residual {rep.final_residual:.3e}")
    return rep


def _sign_stats(rep: SolveReport):
    sol = rep.solution
    x, v = sol.nodes, sol.values
    tol_sign = 2.0 * rep.final_residual * sol.dx
    left, right = x <= 0, x >= 0
    return x, v, tol_sign, float(np.min(v[left])), float(np.max(v[right]))


def run_maxprinciple(cfg: RunConfig, write: bool = True) -> MaxPrincipleReport:
    """Solve with the odd datum and check oddness and the sign split at the converged state.

    Raises ``AssertionFailed`` (after writing outputs) naming the worst node.
    """
    p = cfg.params()
    u0 = cfg.datum(p)
    if not u0.odd:
        raise PreconditionError("maximum principle needs an odd datum")
    if u0.height < 0:  # odd extension puts a positive bump on (d, inf)
        raise PreconditionError("datum must be nonpositive on (d, inf)")
    rep = _solve_datum(cfg, p, u0)
    x, v, tol_sign, min_left, max_right = _sign_stats(rep)
    gaps = np.abs(v + v[::-1])
    r = residual(rep.solution, p.s)
    rows = [NodeRow(float(a), float(b), float(c), float(g)) for a, b, c, g in zip(x, v, r, gaps)]
    tol_odd = _tol_odd(cfg)
    failure, node = "", -1
    if gaps.max() > tol_odd:
        node = int(np.argmax(gaps))
        failure = f"odd symmetry gap {gaps[node]:.3e} at node {node} (x = {x[node]})"
    elif min_left < -tol_sign:
        node = int(np.argmin(np.where(x <= 0, v, np.inf)))
        failure = f"u = {v[node]:.3e} < 0 at node {node} (x = {x[node]})"
    elif max_right > tol_sign:
        node = int(np.argmax(np.where(x >= 0, v, -np.inf)))
        failure = f"u = {v[node]:.3e} > 0 at node {node} (x = {x[node]})"
    report = MaxPrincipleReport(not failure, tol_odd, tol_sign, float(gaps.max()), min_left, max_right,
                                rows, rep, failure)
    if write:
        out = Path(cfg.output_dir)
        write_csv(out / "maxprinciple.csv", rows)
        write_summary(cfg, "maxprinciple", report.passed, {
            "tol_odd": tol_odd, "tol_sign": tol_sign, "odd_gap": report.odd_gap,
            "min_left": min_left, "max_right": max_right, "iterations": rep.iters,
            "final_residual": rep.final_residual, "boundary_residual": rep.boundary_residual,
            "quadrature_error": rep.quadrature_error, "clamp_ok": clamp_check(rep, p), "failure": failure,
        })
        if cfg.plots:
            _plot(out / "maxprinciple.svg", x, v, "x", "u(x)")
    if failure:
        raise AssertionFailed(failure, node=node, value=float(v[node]))
    return report


def stickiness_exponent(p: Params) -> float:
    return (2.0 + p.epsilon0) / (1.0 - p.s.s)


def run_stickiness(cfg: RunConfig, write: bool = True) -> list:
    """Sweep eta, record the first-node jump proxy and check the calibrated power-law floor.

    ``C_fit`` comes from the largest eta; the floor check applies to the
    smaller ones.  A row whose solve fails is kept with ``converged = False``.
    """
    raw = []
    for eta in cfg.eta_sweep:
        p = cfg.params(eta)
        u0 = cfg.datum(p)
        try:
            rep = _solve_datum(cfg, p, u0)
        except FracGraphError as exc:
            log.warning("eta = %g: %s", eta, exc)
            raw.append((eta, p, None))
            continue
        raw.append((eta, p, rep))
    alpha = stickiness_exponent(cfg.params())
    top = raw[0]
    c_fit = math.nan
    if top[2] is not None and top[2].solution.values[0] > 0:
        c_fit = top[0] ** alpha / float(top[2].solution.values[0])
    rows = []
    tol_odd = _tol_odd(cfg)
    for k, (eta, p, rep) in enumerate(raw):
        if rep is None:
            rows.append(StickinessRow(eta, math.nan, math.nan, False, False, math.nan, math.nan, math.nan,
                                      False, False))
            continue
        x, v, tol_sign, min_left, max_right = _sign_stats(rep)
        jump = float(v[0])
        floor = eta ** alpha / c_fit if math.isfinite(c_fit) else math.nan
        interior_left = x < 0
        near = x < -p.d + p.d0
        sign_ok = min_left >= -tol_sign and max_right <= tol_sign
        odd_ok = float(np.max(np.abs(v + v[::-1]))) <= tol_odd
        floor_ok = True if k == 0 else bool(jump >= floor * (1.0 - cfg.floor_slack))
        rows.append(StickinessRow(
            eta, jump, floor, bool(sign_ok), bool(odd_ok), rep.final_residual,
            float(np.min(v[interior_left])), float(np.min(v[near])), floor_ok, True,
        ))
    if write:
        out = Path(cfg.output_dir)
        write_csv(out / "stickiness.csv", rows)
        passed, checks = stickiness_verdict(rows)
        write_summary(cfg, "stickiness", passed, {"c_fit": c_fit, "exponent": alpha, "checks": checks})
        if cfg.plots:
            good = [r for r in rows if r.eta > 0 and r.jump_proxy > 0]
            if good:
                _plot(out / "stickiness.svg", [r.eta for r in good], [r.jump_proxy for r in good],
                      "eta", "jump proxy", loglog=True)
    return rows


def stickiness_verdict(rows: list) -> tuple[bool, dict]:
    """Positivity (for eta > 0), signs, oddness, floor, and monotone jump in eta."""
    live = [r for r in rows if r.eta > 0]
    jumps = [r.jump_proxy for r in live]
    # monotone within the solver noise: a later (smaller eta) jump may exceed an
    # earlier one by at most the sign tolerance scale
    noise = [10 * r.residual for r in live]
    checks = {
        "converged": all(r.converged for r in rows),
        "jump_positive": all(r.jump_proxy > 0 for r in live),
        "sign_ok": all(r.sign_ok for r in rows),
        "odd_ok": all(r.odd_ok for r in rows),
        "floor_ok": all(r.floor_ok for r in rows),
        "monotone": all(b <= a + n for a, b, n in zip(jumps, jumps[1:], noise[1:])),
        "zero_eta_flat": all(r.jump_proxy == 0 for r in rows if r.eta == 0),
    }
    return all(checks.values()), checks


def run_verify(cfg: RunConfig, write: bool = True) -> list:
    """All closed-form and quadrature checks of the barrier chain at the configured parameters."""
    p = cfg.params()
    q = cfg.quadrature
    reports = [check_ks_geop(p)]
    indicator = paper_datum(p, 0.0)
    mass = datum_mass_integral(indicator, p, q)
    reports.append(IneqReport.build("datum_mass_indicator", mass, 1.6 * p.eta, "=",
                                    tolerance=1e-6 * 1.6 * p.eta))
    reports.append(IneqReport.build("datum_mass_ge_eta", mass, p.eta, ">="))
    trap = datum_mass_integral(paper_datum(p), p, q)
    reports.append(IneqReport.build("datum_mass_trapezoid", trap, mass, ">="))
    reports.append(b_tail_integral(p, q))
    qs = [0.0] + ([p.delta] if math.isfinite(p.delta) and p.delta > 0 else [])
    for pp in np.linspace(-p.d, -p.d + p.d0, 5):
        for qq in qs:
            r = bump_b_bound(p, float(pp), q, pt_q=qq)
            reports.append(dataclasses.replace(r, name=f"b_bound[p={pp!r},q={qq!r}]"))
    for pp in (-p.d + 0.5 * p.d0, -p.d + p.d0):
        for qq in qs:
            tag = f"[p={pp!r},q={qq!r}]"
            try:
                r = bump_a_lower(p, (pp, qq), indicator, q)
            except EnvelopeViolated:
                r = IneqReport.build("a_envelope", indicator.sup_norm + qq, math.sqrt(2.0), "<=")
            reports.append(dataclasses.replace(r, name=r.name + tag))
    reports.append(distance_envelope(p, (-p.d + 0.5 * p.d0, 0.0), indicator, n=100, seed=cfg.seed))
    reports.append(net_curvature_margin(p, q))
    rng = np.random.default_rng(cfg.seed)
    X = rng.uniform(-10, 10, size=(10_000, 2))
    X[:, 0] = np.abs(X[:, 0])
    P = (-rng.uniform(0, 10), rng.uniform(-10, 10))
    gap = reflect_gap(X, P)
    scale = (X[:, 0] - P[0]) ** 2 + (X[:, 1] - P[1]) ** 2 + (X[:, 0] + P[0]) ** 2
    eps = np.finfo(float).eps
    reports.append(IneqReport.build("reflect_identity", float(np.max(np.abs(gap - 4 * X[:, 0] * P[0]) / scale)),
                                    16 * eps, "<="))
    reports.append(IneqReport.build("reflect_inequality", float(np.max(gap)), 0.0, "<="))
    if write:
        write_csv(Path(cfg.output_dir) / "verify.csv", reports)
        write_summary(cfg, "verify", all(r.passed for r in reports),
                      {"failed": [r.name for r in reports if not r.passed]})
    return reports


def run_nmc(cfg: RunConfig, write: bool = True) -> list:
    """Pointwise curvature of the initial (flat-in-window) graph at ``nmc_points``."""
    p = cfg.params()
    u = GridFunction.zeros(cfg.n_nodes, cfg.datum(p), p.d)
    g = u.to_piecewise()
    pts = cfg.nmc_points or tuple(float(x) for x in np.linspace(-p.d, p.d, 9)[1:-1] + 0.5 * u.dx)
    rows = []
    for x0 in pts:
        val, err = nmc_graph(g, x0, p.s, cfg.quadrature, return_error=True)
        rows.append(NmcRow(x0, float(val), float(err)))
    if write:
        write_csv(Path(cfg.output_dir) / "nmc.csv", rows)
        write_summary(cfg, "nmc", True, {"points": len(rows)})
    return rows


def run_solve(cfg: RunConfig, write: bool = True) -> SolveReport:
    p = cfg.params()
    rep = _solve_datum(cfg, p, cfg.datum(p))
    sol = rep.solution
    if write:
        out = Path(cfg.output_dir)
        r = residual(sol, p.s)
        v = sol.values
        rows = [NodeRow(float(a), float(b), float(c), float(abs(g)))
                for a, b, c, g in zip(sol.nodes, v, r, v + v[::-1])]
        write_csv(out / "solve.csv", rows)
        write_summary(cfg, "solve", rep.converged and clamp_check(rep, p), {
            "iterations": rep.iters, "final_residual": rep.final_residual,
            "boundary_residual": rep.boundary_residual, "quadrature_error": rep.quadrature_error,
            "clamp_ok": clamp_check(rep, p), "residual_trace": rep.residual_trace.tolist(),
        })
        if cfg.plots:
            _plot(out / "solve.svg", sol.nodes, v, "x", "u(x)")
    return rep


# ---------------------------------------------------------------------------
# argument handling


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracgraph", description=__doc__.splitlines()[0])
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", type=Path, help="YAML config file")
    ap.add_argument("--s", type=float)
    ap.add_argument("--epsilon0", type=float)
    ap.add_argument("--eta", type=float)
    ap.add_argument("--barrier-const", type=float)
    ap.add_argument("--d", type=float, help="override the window half-width")
    ap.add_argument("--ramp-width", type=float)
    ap.add_argument("--datum-height", type=float)
    ap.add_argument("--n-nodes", type=int)
    ap.add_argument("--eta-sweep", type=lambda t: tuple(float(v) for v in t.split(",")))
    ap.add_argument("--points", type=lambda t: tuple(float(v) for v in t.split(",")))
    ap.add_argument("--residual-tol", type=float)
    ap.add_argument("--max-iters", type=int)
    ap.add_argument("--no-symmetrize", action="store_true")
    ap.add_argument("--output-dir")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--plots", action="store_true")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def build_config(args: argparse.Namespace) -> RunConfig:
    raw = {}
    if args.config is not None:
        raw = yaml.safe_load(args.config.read_text()) or {}
    raw["mode"] = args.mode
    params = dict(raw.get("params") or {})
    for key in ("s", "epsilon0", "eta", "barrier_const", "d"):
        v = getattr(args, key)
        if v is not None:
            params[key] = v
    raw["params"] = params
    datum = dict(raw.get("datum") or {})
    if args.ramp_width is not None:
        datum["ramp_width"] = args.ramp_width
    if args.datum_height is not None:
        datum["height"] = args.datum_height
    raw["datum"] = datum
    if args.n_nodes is not None:
        raw["grid"] = {**(raw.get("grid") or {}), "n_nodes": args.n_nodes}
    solve_kw = dict(raw.get("solve") or {})
    if args.residual_tol is not None:
        solve_kw["residual_tol"] = args.residual_tol
    if args.max_iters is not None:
        solve_kw["max_iters"] = args.max_iters
    if args.no_symmetrize:
        solve_kw["odd_symmetrize"] = False
    raw["solve"] = solve_kw
    if args.eta_sweep is not None:
        raw["eta_sweep"] = list(args.eta_sweep)
    if args.points is not None:
        raw["nmc_points"] = list(args.points)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.plots:
        raw["plots"] = True
    if args.output_dir is not None:
        raw["output_dir"] = args.output_dir
    env = os.environ.get(OUTPUT_ENV)
    if env:
        raw["output_dir"] = env
    return RunConfig.from_dict(raw)


def run(cfg: RunConfig) -> int:
    """Run one mode, write its outputs and return the exit code."""
    if cfg.mode == "verify":
        reports = run_verify(cfg)
        for r in reports:
            if not r.passed:
                log.error("failed: %s lhs=%r rhs=%r margin=%r", r.name, r.lhs, r.rhs, r.margin)
        return 0 if all(r.passed for r in reports) else 1
    if cfg.mode == "experiment-stickiness":
        passed, checks = stickiness_verdict(run_stickiness(cfg))
        if not passed:
            log.error("stickiness checks failed: %s", [k for k, v in checks.items() if not v])
        return 0 if passed else 1
    if cfg.mode == "experiment-maxprinciple":
        run_maxprinciple(cfg)
        return 0
    if cfg.mode == "solve":
        rep = run_solve(cfg)
        return 0 if clamp_check(rep, cfg.params()) else 1
    run_nmc(cfg)
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(build_config(args))
    except AssertionFailed as exc:
        log.error("assertion failed: %s", exc)
        return 1
    except (FracGraphError, ValueError, OSError, yaml.YAMLError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
