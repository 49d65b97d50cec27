"""Zero-ablation logit lens for Post-LN / DeepNorm transformer encoders on a 64-square board."""
from .errors import (
    ConfigError,
    FormatError,
    InputError,
    LensError,
    NoLegalMovesError,
    NumericError,
    RuleError,
    VerificationError,
)
from .linalg import LayerNormParams, NormStats, layer_norm, mish, softmax_masked, squared_relu, swish
from .model import (
    AblationSpec,
    ActivationTrace,
    ModelConfig,
    PolicyDistribution,
    SmolgenConfig,
    WeightSet,
    forward,
    init_model,
    policy_head,
    prepare_input,
)
from .lens import LensReport, lens_policy, lens_sweep, preln_lens_direct
from .decomp import DecompositionTerms, decompose, verify_identity

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "FormatError", "InputError", "LensError", "NoLegalMovesError",
    "NumericError", "RuleError", "VerificationError",
    "LayerNormParams", "NormStats", "layer_norm", "mish", "softmax_masked", "squared_relu", "swish",
    "AblationSpec", "ActivationTrace", "ModelConfig", "PolicyDistribution", "SmolgenConfig",
    "WeightSet", "forward", "init_model", "policy_head", "prepare_input",
    "LensReport", "lens_policy", "lens_sweep", "preln_lens_direct",
    "DecompositionTerms", "decompose", "verify_identity",
]
