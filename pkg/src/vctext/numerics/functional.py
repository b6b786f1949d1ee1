"""Differentiable building blocks: affinities, layer norm, attention.

Everything here accepts arbitrary leading batch axes and only ever
addresses the trailing axes, so callers may vectorize freely.
"""

from __future__ import annotations

import numpy as np

from vctext.errors import ShapeError, ZeroNormError
from vctext.numerics.tensor import Tensor, as_tensor, concat

NORM_GUARD = 1e-8
LAYER_NORM_EPS = 1e-5


def _row_norms(t: Tensor, where: str) -> Tensor:
    """L2 norm over the trailing axis, kept as (..., 1); guards against ~0."""
    sq = (t * t).sum(axis=-1, keepdims=True)
    norms = sq.sqrt()
    if norms.data.min() <= NORM_GUARD:
        raise ZeroNormError(f"{where}: embedding norm <= {NORM_GUARD}; "
                            "zero embeddings indicate corrupt upstream data")
    return norms


def cosine_affinity(a, b) -> Tensor:
    """Cosine similarity of two equal-length vectors, in [-1, 1]."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"cosine_affinity needs equal-length vectors, "
                         f"got {a.shape} and {b.shape}")
    if a.size < 1:
        raise ShapeError("cosine_affinity needs length >= 1")
    na = _row_norms(a.reshape(1, -1), "cosine_affinity a")
    nb = _row_norms(b.reshape(1, -1), "cosine_affinity b")
    dot = (a * b).sum()
    return dot / (na * nb).reshape(())


def cosine_matrix(a: Tensor, b: Tensor) -> Tensor:
    """Pairwise cosines: (..., R, D) x (..., C, D) -> (..., R, C).

    Same formula as cosine_affinity, vectorized over rows of both sides.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"cosine_matrix dim mismatch: {a.shape} vs {b.shape}")
    na = _row_norms(a, "cosine_matrix a")              # (..., R, 1)
    nb = _row_norms(b, "cosine_matrix b")              # (..., C, 1)
    dots = a @ b.swapaxes(-1, -2)                      # (..., R, C)
    return dots / (na * nb.swapaxes(-1, -2))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor,
               eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize each trailing-axis row to zero mean / unit variance."""
    x = as_tensor(x)
    d = x.shape[-1]
    if d < 2:
        raise ShapeError("layer_norm needs feature dimension >= 2")
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = (var + eps) ** -0.5
    return centered * inv * gamma + beta


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    # max is detached: a constant shift leaves both value and gradient exact
    shift = x.data.max(axis=axis, keepdims=True)
    e = (x - shift).exp()
    return e / e.sum(axis=axis, keepdims=True)


def logsumexp(x: Tensor, axis: int = -1) -> Tensor:
    shift = x.data.max(axis=axis, keepdims=True)
    e = (x - shift).exp()
    return e.sum(axis=axis, keepdims=False).log() + np.squeeze(shift, axis=axis)


def quick_gelu(x: Tensor) -> Tensor:
    """Smooth GELU-style gate, x * sigmoid(1.702 x) (the CLIP convention)."""
    return x * (x * 1.702).sigmoid()


def multi_head_self_attention(x: Tensor, wq: Tensor, bq: Tensor,
                              wk: Tensor, bk: Tensor, wv: Tensor, bv: Tensor,
                              wo: Tensor, bo: Tensor, heads: int) -> Tensor:
    """Standard MSA over the second-to-last axis: (..., S, D) -> (..., S, D).

    Per head: softmax(Q K^T / sqrt(D/heads)) V; heads concatenated, then
    output-projected. All leading axes are treated as batch.
    """
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeError("attention input must be at least (S, D)")
    s, d = x.shape[-2], x.shape[-1]
    if d % heads != 0:
        raise ShapeError(f"embed dim {d} not divisible by {heads} heads")
    if s < 1:
        raise ShapeError("attention needs at least one token")
    dh = d // heads

    def split_heads(t: Tensor) -> Tensor:
        # leading axes come from t itself: projections may add batch axes
        return t.reshape(*t.shape[:-1], heads, dh).swapaxes(-3, -2)

    q = split_heads(x @ wq + bq)
    k = split_heads(x @ wk + bk)
    v = split_heads(x @ wv + bv)
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dh))     # (..., h, S, S)
    attn = softmax(scores, axis=-1)
    merged = (attn @ v).swapaxes(-3, -2)                        # (..., S, h, dh)
    mixed = merged.reshape(*merged.shape[:-2], d)
    return mixed @ wo + bo
