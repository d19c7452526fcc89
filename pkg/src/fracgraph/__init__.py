"""Nonlocal minimal graphs: fractional curvature, perimeter differences, a discrete solver and barrier checks."""
from .errors import FracGraphError
from .kernel import FracOrder, QuadratureSpec, g_profile, interaction, nmc_graph, nmc_set_bruteforce
from .model import ExteriorDatum, GridFunction, Params, eval_datum, paper_datum, paper_params
from .perimeter import EnergyWindow, energy_delta
from .solver import SolveConfig, SolveReport, clamp_check, residual, solve

__all__ = [
    "FracGraphError", "FracOrder", "QuadratureSpec", "g_profile", "interaction", "nmc_graph",
    "nmc_set_bruteforce", "ExteriorDatum", "GridFunction", "Params", "eval_datum", "paper_datum",
    "paper_params", "EnergyWindow", "energy_delta", "SolveConfig", "SolveReport", "clamp_check",
    "residual", "solve",
]
