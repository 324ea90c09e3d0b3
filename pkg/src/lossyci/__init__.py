"""Certified common-information bounds for finite pair sources.

The chain K <= I(Zhat1;Zhat2) <= C is evaluated numerically: the upper
bound comes from a conditional-independence decomposition of the
reconstruction joint, the lower bound from a common-part coarsening
recoverable on each side, and the middle term from rate-distortion
optimal encoders.  Every returned bound carries the feasibility
residuals that make it trustworthy.
"""

from .common_info import (
    CommonPart,
    GKSolution,
    WynerSolution,
    gk_bruteforce,
    gk_common_part,
    gk_lower,
    wyner_bruteforce,
    wyner_upper,
)
from .config import RunConfig
from .probability import (
    Alphabet,
    Channel,
    JointDistribution,
    ValidationError,
    attach,
    channel_from_json,
    channel_to_json,
    condition,
    deterministic_channel,
    distribution_from_json,
    distribution_to_json,
    label_projection,
    marginalize,
    shared_component_source,
    validate,
)
from .rate_distortion import (
    DistortionMeasure,
    InfeasibleDistortionError,
    RDSolution,
    ba_at_distortion,
    ba_joint,
    ba_single,
    hamming,
)
from .sandwich import (
    BoundReport,
    ImplicationResult,
    ProofStep,
    ProofTrace,
    equality_case_check,
    implication_suite,
    proof_trace,
    sandwich_check,
)
from .shannon import (
    InteractionBreakdown,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    interaction_breakdown,
    interaction_information,
    markov_residual,
    mutual_information,
)
from .sources import block_diagonal, dsbs, random_joint, shared_random

__all__ = [
    "Alphabet",
    "BoundReport",
    "Channel",
    "CommonPart",
    "DistortionMeasure",
    "GKSolution",
    "ImplicationResult",
    "InfeasibleDistortionError",
    "InteractionBreakdown",
    "JointDistribution",
    "ProofStep",
    "ProofTrace",
    "RDSolution",
    "RunConfig",
    "ValidationError",
    "WynerSolution",
    "attach",
    "ba_at_distortion",
    "ba_joint",
    "ba_single",
    "block_diagonal",
    "channel_from_json",
    "channel_to_json",
    "condition",
    "conditional_entropy",
    "conditional_mutual_information",
    "deterministic_channel",
    "distribution_from_json",
    "distribution_to_json",
    "dsbs",
    "entropy",
    "equality_case_check",
    "gk_bruteforce",
    "gk_common_part",
    "gk_lower",
    "hamming",
    "implication_suite",
    "interaction_breakdown",
    "interaction_information",
    "label_projection",
    "marginalize",
    "markov_residual",
    "mutual_information",
    "proof_trace",
    "random_joint",
    "sandwich_check",
    "shared_component_source",
    "shared_random",
    "validate",
    "wyner_bruteforce",
    "wyner_upper",
]

__version__ = "0.1.0"
