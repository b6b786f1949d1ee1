"""Parameter construction for the video-text head.

Parameters live in an ordered dict keyed by dotted names. Every tensor is
drawn from an Rng child stream addressed by its own name, so initialization
is independent of creation order and stable across config toggles that
add or remove other parameters.
"""

from __future__ import annotations

import math

import numpy as np

from vctext.head.config import HeadConfig
from vctext.numerics.rng import Rng
from vctext.numerics.tensor import Tensor

INIT_STD = 0.02
TEMPERATURE_INIT = 1.0 / 0.07
TEMPERATURE_MAX = 100.0


def _attention_block_names(prefix: str, d: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {
        f"{prefix}.ln_gamma": (d,),
        f"{prefix}.ln_beta": (d,),
    }
    for proj in ("q", "k", "v", "o"):
        shapes[f"{prefix}.w{proj}"] = (d, d)
        shapes[f"{prefix}.b{proj}"] = (d,)
    return shapes


def param_shapes(config: HeadConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape map; the dict order is the canonical parameter order."""
    d, p = config.embed_dim, config.proj_dim
    shapes: dict[str, tuple[int, ...]] = {}

    def weighting_site(site: str):
        if config.weighting_mode == "sig_affinity":
            shapes[f"{site}.gate"] = ()
        elif config.weighting_mode == "learned_scalar":
            shapes[f"{site}.scale"] = ()
        elif config.weighting_mode == "attention":
            shapes[f"{site}.attn_q"] = (d, d)
            shapes[f"{site}.attn_k"] = (d, d)

    weighting_site("boost")
    for i in range(config.num_layers):
        if config.attention_mode == "divided":
            shapes.update(_attention_block_names(f"layers.{i}.cross", d))
            shapes.update(_attention_block_names(f"layers.{i}.temporal", d))
        else:
            shapes.update(_attention_block_names(f"layers.{i}.joint", d))
        weighting_site(f"layers.{i}.reweight")
        hidden = config.mlp_ratio * d
        shapes[f"layers.{i}.mlp.ln_gamma"] = (d,)
        shapes[f"layers.{i}.mlp.ln_beta"] = (d,)
        shapes[f"layers.{i}.mlp.w1"] = (d, hidden)
        shapes[f"layers.{i}.mlp.b1"] = (hidden,)
        shapes[f"layers.{i}.mlp.w2"] = (hidden, d)
        shapes[f"layers.{i}.mlp.b2"] = (d,)
    shapes["proj.weight"] = (d, p)
    shapes["proj.bias"] = (p,)
    shapes["log_temperature"] = ()
    if config.classifier_mode == "text_only":
        shapes["classifier.text_w"] = (p, 1)
        shapes["classifier.text_b"] = ()
    elif config.classifier_mode == "visual_only":
        shapes["classifier.visual_w"] = (p, config.n_classes)
        shapes["classifier.visual_b"] = (config.n_classes,)
    return shapes


def init_params(config: HeadConfig, rng: Rng) -> dict[str, Tensor]:
    """Truncated-normal weights (std 0.02), unit LN gamma, zero biases,
    gates at 1.0, temperature at 1/0.07."""
    params: dict[str, Tensor] = {}
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if name == "log_temperature":
            values = np.asarray(math.log(TEMPERATURE_INIT))
        elif leaf in ("gate", "scale"):
            values = np.asarray(1.0)
        elif leaf == "ln_gamma":
            values = np.ones(shape)
        elif leaf.startswith("b") or leaf in ("ln_beta", "bias", "text_b", "visual_b"):
            values = np.zeros(shape)
        else:
            values = rng.split(name).truncated_normal(shape, std=INIT_STD)
        params[name] = Tensor(values, requires_grad=True)
    return params


def no_decay_names(params: dict[str, Tensor]) -> frozenset:
    """Scalars, biases and norm parameters are exempt from weight decay."""
    return frozenset(name for name, t in params.items()
                     if t.data.ndim <= 1 or name == "log_temperature")


def clamp_temperature(params: dict[str, Tensor]) -> None:
    """Projection step keeping the learned temperature <= 100."""
    cap = math.log(TEMPERATURE_MAX)
    lt = params["log_temperature"].data
    if lt > cap:
        params["log_temperature"].data = np.asarray(cap)


def zero_grads(params: dict[str, Tensor]) -> None:
    for t in params.values():
        t.grad = None
