"""Symbolic control of Euler-Lagrange systems through virtual confinement zones.

Tasks are tightened by the zone radius, a controller is synthesized for the
single-integrator zone center on a grid, and a model-free saturated funnel
law keeps the plant inside the moving zone.
"""

from ._kernels import BACKEND, available_backends, load_backend
from .abstraction import CsrModel, InputGrid, IntegratorModel, build_model, check_frr
from .confinement import (
    FeasibilityBounds,
    FunnelParams,
    PsiConfig,
    VczParams,
    check_feasibility,
    solve_least_conservative,
    solve_most_efficient,
)
from .errors import VczError
from .geometry import GridSpec, IntervalBox
from .plants import DisturbanceSpec, make_plant
from .scenario import load_scenario
from .sim import Scenario, run, synthesize
from .specification import RasSequence, RasTask, Separation, tighten
from .synthesis import solve_invariance, solve_reach_avoid, synthesize_sequence

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "available_backends",
    "load_backend",
    "CsrModel",
    "InputGrid",
    "IntegratorModel",
    "build_model",
    "check_frr",
    "FeasibilityBounds",
    "FunnelParams",
    "PsiConfig",
    "VczParams",
    "check_feasibility",
    "solve_least_conservative",
    "solve_most_efficient",
    "VczError",
    "GridSpec",
    "IntervalBox",
    "DisturbanceSpec",
    "make_plant",
    "load_scenario",
    "Scenario",
    "run",
    "synthesize",
    "RasSequence",
    "RasTask",
    "Separation",
    "tighten",
    "solve_invariance",
    "solve_reach_avoid",
    "synthesize_sequence",
]
