"""lamdis: TD(lambda) fixed points, discrepancy detection, and memory synthesis
for tabular POMDPs."""

__version__ = "0.1.0"

from .model import (
    InvalidPomdpError,
    NonEpisodicError,
    Policy,
    PolicyTensors,
    Pomdp,
    PomdpSource,
    ValidationReport,
    policy_tensors,
    validate,
)
from .solver import (
    DiscrepancySpec,
    EffectiveMdp,
    NormKind,
    QTable,
    VTable,
    effective_mdp,
    lambda_discrepancy,
    q_lambda,
    stationary_weights,
    v_lambda,
)
from .memory import MemoryFn, augment, lift_policy, random_memory

__all__ = [
    "DiscrepancySpec",
    "EffectiveMdp",
    "InvalidPomdpError",
    "MemoryFn",
    "NonEpisodicError",
    "NormKind",
    "Policy",
    "PolicyTensors",
    "Pomdp",
    "PomdpSource",
    "QTable",
    "ValidationReport",
    "VTable",
    "augment",
    "effective_mdp",
    "lambda_discrepancy",
    "lift_policy",
    "policy_tensors",
    "q_lambda",
    "random_memory",
    "stationary_weights",
    "v_lambda",
    "validate",
]
