"""Flow-control games with an intervention device and direct mechanisms."""

from .flow import (
    FlowUtility,
    best_response,
    bne_solve,
    max_efficiency_value,
    nash_equilibrium,
    optimal_profile,
)
from .game import ActionRule, Scenario, TypeProfile, TypeSpace
from .intervention import AffineRule, design_rule, intervene, sustain_conditions
from .kernels import BACKEND

__all__ = [
    "ActionRule",
    "AffineRule",
    "BACKEND",
    "FlowUtility",
    "Scenario",
    "TypeProfile",
    "TypeSpace",
    "best_response",
    "bne_solve",
    "design_rule",
    "intervene",
    "max_efficiency_value",
    "nash_equilibrium",
    "optimal_profile",
    "sustain_conditions",
]
__version__ = "0.1.0"
