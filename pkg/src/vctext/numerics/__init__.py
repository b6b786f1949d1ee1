"""Deterministic dense-array math with reverse-mode gradients."""

from vctext.numerics.functional import (
    LAYER_NORM_EPS,
    NORM_GUARD,
    cosine_affinity,
    cosine_matrix,
    layer_norm,
    logsumexp,
    multi_head_self_attention,
    quick_gelu,
    softmax,
)
from vctext.numerics.gradcheck import check_param_gradients, grad_check
from vctext.numerics.optim import OptimizerState, adam_step, cosine_lr, init_optimizer
from vctext.numerics.rng import Rng
from vctext.numerics.tensor import Tensor, as_tensor, concat, no_grad

__all__ = [
    "LAYER_NORM_EPS", "NORM_GUARD", "OptimizerState", "Rng", "Tensor",
    "adam_step", "as_tensor", "check_param_gradients", "concat",
    "cosine_affinity", "cosine_lr", "cosine_matrix", "grad_check",
    "init_optimizer", "layer_norm", "logsumexp",
    "multi_head_self_attention", "no_grad", "quick_gelu", "softmax",
]
