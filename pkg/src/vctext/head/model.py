"""The video-text head: boost, attend, re-weight, pool, classify.

Token layout is fixed everywhere: grids are (..., T, S, D) with
S = 1 + n + m tokens per timestep; index 0 is the visual token, indices
1..n the class-text tokens, n+1..n+m the auxiliary-text tokens. Leading
axes are free batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vctext.errors import LabelError, NonFiniteError, ShapeError
from vctext.head.config import HeadConfig
from vctext.numerics.functional import (
    _row_norms,
    cosine_matrix,
    layer_norm,
    logsumexp,
    multi_head_self_attention,
    quick_gelu,
)
from vctext.numerics.tensor import Tensor, as_tensor, concat


@dataclass
class HeadOutputs:
    """Projected embeddings the classifier consumes."""

    video: Tensor                 # (..., proj_dim)
    class_text: Tensor            # (..., n, proj_dim)
    aux_categories: Tensor | None  # (..., k, proj_dim)
    grid_trace: list[np.ndarray] | None = None


@dataclass
class LogitSet:
    """Per-class scores plus optional class-by-category auxiliary scores."""

    class_logits: Tensor          # (..., n)
    aux_logits: Tensor | None     # (..., n, k)
    temperature: float


def _token_weights(site: str, visual: Tensor, texts: Tensor,
                   params: dict[str, Tensor], config: HeadConfig) -> Tensor:
    """Per-(timestep, text) weights in (0,1): (..., T, D) x (..., P, D) -> (..., T, P)."""
    mode = config.weighting_mode
    if mode == "sig_affinity":
        return (params[f"{site}.gate"] * cosine_matrix(visual, texts)).sigmoid()
    if mode == "attention":
        q = visual @ params[f"{site}.attn_q"]
        k = texts @ params[f"{site}.attn_k"]
        return ((q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(config.embed_dim))).sigmoid()
    p = texts.shape[-2]
    ones = Tensor(np.ones(visual.shape[:-1] + (p,)))
    if mode == "learned_scalar":
        return params[f"{site}.scale"].sigmoid() * ones
    return ones  # weighting_mode == "none": replicate unweighted


def token_boost(frames: Tensor, class_text: Tensor, aux_text: Tensor | None,
                params: dict[str, Tensor], config: HeadConfig) -> Tensor:
    """Replicate text tokens per frame, scaled by frame-text weights."""
    frames, class_text = as_tensor(frames), as_tensor(class_text)
    if frames.shape[-1] != config.embed_dim:
        raise ShapeError(f"frames dim {frames.shape[-1]} != embed_dim {config.embed_dim}")
    if class_text.shape != (config.n_classes, config.embed_dim):
        raise ShapeError(f"class_text shape {class_text.shape} != "
                         f"({config.n_classes}, {config.embed_dim})")
    _row_norms(frames, "token_boost frames")
    texts = class_text
    if config.use_aux:
        aux_text = as_tensor(aux_text)
        if aux_text.shape != (config.n_aux, config.embed_dim):
            raise ShapeError(f"aux_text shape {aux_text.shape} != "
                             f"({config.n_aux}, {config.embed_dim})")
        texts = concat([class_text, aux_text], axis=0)
    _row_norms(texts, "token_boost texts")

    weights = _token_weights("boost", frames, texts, params, config)  # (..., T, P)
    boosted = texts * weights.unsqueeze(-1)                           # (..., T, P, D)
    return concat([frames.unsqueeze(-2), boosted], axis=-2)


def cross_modal_attention(grid: Tensor, params: dict[str, Tensor], prefix: str,
                          heads: int) -> Tensor:
    """Pre-norm MSA over the token axis, independently per timestep."""
    normed = layer_norm(grid, params[f"{prefix}.ln_gamma"], params[f"{prefix}.ln_beta"])
    return grid + multi_head_self_attention(
        normed,
        params[f"{prefix}.wq"], params[f"{prefix}.bq"],
        params[f"{prefix}.wk"], params[f"{prefix}.bk"],
        params[f"{prefix}.wv"], params[f"{prefix}.bv"],
        params[f"{prefix}.wo"], params[f"{prefix}.bo"], heads)


def temporal_attention(grid: Tensor, params: dict[str, Tensor], prefix: str,
                       heads: int) -> Tensor:
    """Pre-norm MSA over the time axis, independently per token index.

    Visual and text tokens share the same projection weights, and there is
    no positional encoding, so the pass is bidirectional and order-free.
    """
    flipped = grid.swapaxes(-3, -2)  # (..., S, T, D)
    out = cross_modal_attention(flipped, params, prefix, heads)
    return out.swapaxes(-3, -2)


def joint_attention(grid: Tensor, params: dict[str, Tensor], prefix: str,
                    heads: int) -> Tensor:
    """One MSA over all T*S tokens (the joint-attention ablation)."""
    t, s, d = grid.shape[-3], grid.shape[-2], grid.shape[-1]
    flat = grid.reshape(*grid.shape[:-3], t * s, d)
    out = cross_modal_attention(flat, params, prefix, heads)
    return out.reshape(*out.shape[:-2], t, s, d)


def affinity_reweight(grid: Tensor, params: dict[str, Tensor], site: str,
                      config: HeadConfig) -> Tensor:
    """Pool each text token over time, then re-scale it per timestep by the
    fresh visual-text weight. Text tokens are overwritten (no residual);
    visual tokens pass through. Identity when weighting is disabled."""
    if config.weighting_mode == "none":
        return grid
    visual_keep = grid[..., 0:1, :]          # (..., T, 1, D)
    visual = grid[..., 0, :]                 # (..., T, D)
    text = grid[..., 1:, :]                  # (..., T, P, D)
    pooled = text.mean(axis=-3)              # (..., P, D)
    weights = _token_weights(site, visual, pooled, params, config)
    new_text = pooled.unsqueeze(-3) * weights.unsqueeze(-1)
    return concat([visual_keep, new_text], axis=-2)


def _mlp_block(grid: Tensor, params: dict[str, Tensor], prefix: str) -> Tensor:
    normed = layer_norm(grid, params[f"{prefix}.ln_gamma"], params[f"{prefix}.ln_beta"])
    hidden = quick_gelu(normed @ params[f"{prefix}.w1"] + params[f"{prefix}.b1"])
    return grid + (hidden @ params[f"{prefix}.w2"] + params[f"{prefix}.b2"])


def _project(emb: Tensor, params: dict[str, Tensor]) -> Tensor:
    """Shared linear map to proj_dim over the trailing axis."""
    if emb.shape[-1] != params["proj.weight"].shape[-2]:
        raise ShapeError(f"cannot project dim {emb.shape[-1]}")
    return emb @ params["proj.weight"] + params["proj.bias"]


def _category_means(aux: Tensor, aux_categories: np.ndarray, k: int) -> Tensor:
    """(..., m, D) -> (..., k, D), mean over each category's members."""
    cats = np.asarray(aux_categories, dtype=np.intp)
    if cats.shape != (aux.shape[-2],):
        raise ShapeError(f"aux_categories shape {cats.shape} does not match "
                         f"{aux.shape[-2]} aux rows")
    if cats.size and (cats.min() < 0 or cats.max() >= k):
        raise ShapeError(f"aux category ids must lie in [0, {k})")
    pooled = []
    for c in range(k):
        members = np.where(cats == c)[0]
        if len(members) == 0:
            raise ShapeError(f"aux category {c} has no members")
        pooled.append(aux.index_select(-2, members).mean(axis=-2).unsqueeze(-2))
    return concat(pooled, axis=-2)


def head_forward(config: HeadConfig, params: dict[str, Tensor], frames,
                 class_text, aux_text=None, aux_categories=None,
                 collect_trace: bool = False) -> HeadOutputs:
    """Full head pass: boost -> L x (attention, re-weight, MLP) -> pool -> project.

    frames (..., T, D); class_text (n, D); aux_text (m, D) used only when
    config.use_aux. Deterministic given params and inputs.
    """
    frames = as_tensor(frames)
    if frames.ndim < 2:
        raise ShapeError("frames must be at least (T, D)")
    class_text = as_tensor(class_text)

    grid = token_boost(frames, class_text, aux_text, params, config)
    trace = [grid.data] if collect_trace else None

    for i in range(config.num_layers):
        if config.attention_mode == "divided":
            grid = cross_modal_attention(grid, params, f"layers.{i}.cross", config.num_heads)
            grid = temporal_attention(grid, params, f"layers.{i}.temporal", config.num_heads)
        else:
            grid = joint_attention(grid, params, f"layers.{i}.joint", config.num_heads)
        grid = affinity_reweight(grid, params, f"layers.{i}.reweight", config)
        grid = _mlp_block(grid, params, f"layers.{i}.mlp")
        if collect_trace:
            trace.append(grid.data)

    pooled = grid.mean(axis=-3)                      # (..., S, D)
    n = config.n_classes
    video = _project(pooled[..., 0:1, :], params)[..., 0, :]
    class_emb = _project(pooled[..., 1:1 + n, :], params)

    aux_cat_emb = None
    if config.use_aux:
        aux_pooled = pooled[..., 1 + n:, :]
        aux_cat_emb = _project(
            _category_means(aux_pooled, aux_categories, config.n_categories), params)

    if config.substitute_backbone_visual:
        video = _project(frames.mean(axis=-2).unsqueeze(-2), params)[..., 0, :]
    if config.substitute_backbone_text:
        class_emb = _project(class_text, params)
        if config.use_aux:
            aux_cat_emb = _project(
                _category_means(as_tensor(aux_text), aux_categories,
                                config.n_categories), params)

    for t, where in ((video, "video output"), (class_emb, "class-text output")):
        t.assert_finite(where)
    if aux_cat_emb is not None:
        aux_cat_emb.assert_finite("aux-category output")
    return HeadOutputs(video=video, class_text=class_emb,
                       aux_categories=aux_cat_emb, grid_trace=trace)


def classify(outputs: HeadOutputs, params: dict[str, Tensor],
             config: HeadConfig) -> LogitSet:
    """Turn head outputs into logits under the configured classifier."""
    tau = params["log_temperature"].exp()
    mode = config.classifier_mode
    if mode == "affinity":
        raw = cosine_matrix(outputs.video.unsqueeze(-2), outputs.class_text)
        class_logits = (raw * tau)[..., 0, :]
    elif mode == "text_only":
        class_logits = (outputs.class_text @ params["classifier.text_w"])[..., 0] \
            + params["classifier.text_b"]
    else:  # visual_only
        class_logits = (outputs.video.unsqueeze(-2) @ params["classifier.visual_w"])[..., 0, :] \
            + params["classifier.visual_b"]

    aux_logits = None
    if config.use_aux:
        if outputs.aux_categories is None:
            raise ShapeError("use_aux config but no aux-category embeddings")
        aux_logits = cosine_matrix(outputs.class_text, outputs.aux_categories) * tau
    return LogitSet(class_logits=class_logits, aux_logits=aux_logits,
                    temperature=float(tau.data.reshape(-1)[0]))


def _ce_from_logits(logits: Tensor, labels) -> Tensor:
    """Softmax cross-entropy over the trailing axis.

    Scalar label: returns per-leading-axis losses (...,). Vector labels of
    shape (B,) pair with logits (..., B, n) and are averaged over B.
    """
    n = logits.shape[-1]
    if np.isscalar(labels) or (isinstance(labels, np.ndarray) and labels.ndim == 0):
        label = int(labels)
        if not 0 <= label < n:
            raise LabelError(f"label {label} outside [0, {n})")
        picked = logits[..., label]
        return logsumexp(logits, axis=-1) - picked
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.dtype.kind not in "iu":
        raise LabelError("single_label mode needs one class index per sample")
    if logits.ndim < 2 or logits.shape[-2] != labels.shape[0]:
        raise LabelError(f"{labels.shape[0]} labels do not match logits "
                         f"{logits.shape}")
    if labels.min() < 0 or labels.max() >= n:
        raise LabelError(f"labels outside [0, {n})")
    idx = np.broadcast_to(labels[:, None], logits.shape[:-1] + (1,))
    picked = logits.take_along_last(idx)[..., 0]
    per_sample = logsumexp(logits, axis=-1) - picked
    return per_sample.mean(axis=-1)


def _bce_from_logits(logits: Tensor, labels) -> Tensor:
    """Mean per-class sigmoid cross-entropy; labels are 0/1 vectors."""
    y = np.asarray(labels, dtype=np.float64)
    n = logits.shape[-1]
    if y.ndim not in (1, 2) or y.shape[-1] != n:
        raise LabelError(f"multi_label mode needs ({n},) or (B, {n}) binary labels")
    if not np.isin(y, (0.0, 1.0)).all():
        raise LabelError("multi_label labels must be 0/1")
    if y.ndim == 2 and (logits.ndim < 2 or logits.shape[-2] != y.shape[0]):
        raise LabelError(f"{y.shape[0]} label rows do not match logits {logits.shape}")
    per_class = logits.softplus() - logits * y   # = -log sigmoid / -log(1-sigmoid)
    per_sample = per_class.mean(axis=-1)
    if y.ndim == 2:
        return per_sample.mean(axis=-1)
    return per_sample


def loss(logit_set: LogitSet, labels, mode: str = "single_label",
         aux_weight: float = 0.1) -> Tensor:
    """Classification loss, plus the auxiliary term when aux logits exist.

    No ground-truth annotations exist for auxiliary prompts, so the aux
    term re-scores classes as class_logits + mean_k aux_logits and applies
    the same criterion under the same labels, weighted by aux_weight.
    """
    if mode == "single_label":
        criterion = _ce_from_logits
    elif mode == "multi_label":
        criterion = _bce_from_logits
    else:
        raise LabelError(f"unknown loss mode '{mode}'")
    total = criterion(logit_set.class_logits, labels)
    if logit_set.aux_logits is not None and aux_weight != 0.0:
        augmented = logit_set.class_logits + logit_set.aux_logits.mean(axis=-1)
        total = total + aux_weight * criterion(augmented, labels)
    total.assert_finite("loss")
    return total
