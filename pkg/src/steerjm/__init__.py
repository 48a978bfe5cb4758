"""Steering <-> joint measurability toolkit.

State assemblages are mapped to steering-equivalent observables, whose joint
measurability decides unsteerability. Includes a small dense SDP solver,
closed-form qubit criteria and incompatibility quantifiers.
"""

__version__ = "0.1.0"

from .assemblage import (
    AssemblageError,
    BipartitePureState,
    MeasurementAssemblage,
    StateAssemblage,
    assemblage_from_state,
    check,
    validate,
)
from .qubit import (
    BlochObservable,
    bloch_of,
    busch_criterion,
    se_observables_closed_form,
    triple_criterion,
    weiszfeld_ft_point,
    yu_oh_criterion,
)
from .robustness import (
    RobustnessReport,
    channel_monotonicity_check,
    half_bound_check,
    incompatibility_robustness,
    incompatibility_weight,
    white_noise_robustness,
)
from .sdp import jm_feasible, lhs_feasible
from .semap import (
    JointObservable,
    LhsModel,
    joint_to_lhs,
    lhs_to_joint,
    se_observables,
)
from .solver import SdpProblem, SdpSolution, SolverError, solve

__all__ = [
    "AssemblageError",
    "BipartitePureState",
    "BlochObservable",
    "JointObservable",
    "LhsModel",
    "MeasurementAssemblage",
    "RobustnessReport",
    "SdpProblem",
    "SdpSolution",
    "SolverError",
    "StateAssemblage",
    "assemblage_from_state",
    "bloch_of",
    "busch_criterion",
    "channel_monotonicity_check",
    "check",
    "half_bound_check",
    "incompatibility_robustness",
    "incompatibility_weight",
    "jm_feasible",
    "joint_to_lhs",
    "lhs_feasible",
    "lhs_to_joint",
    "se_observables",
    "se_observables_closed_form",
    "solve",
    "triple_criterion",
    "validate",
    "weiszfeld_ft_point",
    "white_noise_robustness",
    "yu_oh_criterion",
]
