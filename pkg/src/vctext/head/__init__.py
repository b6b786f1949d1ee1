"""The video-conditioned text head."""

from vctext.head.checkpoint import (
    checkpoint_equal,
    load_checkpoint,
    save_checkpoint,
    validate_against_config,
)
from vctext.head.config import (
    ATTENTION_MODES,
    CLASSIFIER_MODES,
    WEIGHTING_MODES,
    HeadConfig,
)
from vctext.head.flops import head_flops, head_flops_breakdown
from vctext.head.model import (
    HeadOutputs,
    LogitSet,
    affinity_reweight,
    classify,
    cross_modal_attention,
    head_forward,
    joint_attention,
    loss,
    temporal_attention,
    token_boost,
)
from vctext.head.params import (
    TEMPERATURE_INIT,
    TEMPERATURE_MAX,
    clamp_temperature,
    init_params,
    no_decay_names,
    param_shapes,
    zero_grads,
)

__all__ = [
    "ATTENTION_MODES", "CLASSIFIER_MODES", "WEIGHTING_MODES",
    "HeadConfig", "HeadOutputs", "LogitSet", "TEMPERATURE_INIT",
    "TEMPERATURE_MAX", "affinity_reweight", "checkpoint_equal", "classify",
    "clamp_temperature", "cross_modal_attention", "head_flops",
    "head_flops_breakdown", "head_forward", "init_params",
    "joint_attention", "load_checkpoint", "loss", "no_decay_names",
    "param_shapes", "save_checkpoint", "temporal_attention", "token_boost",
    "validate_against_config", "zero_grads",
]
