"""Analytic FLOP accounting for the head.

Counting rules, applied uniformly:
  - one multiply-add (MAC) = 2 FLOPs;
  - a D-dim cosine costs 3D MACs (dot plus both norms) + 4 FLOPs for the
    sqrt/divide, a sigmoid 4 FLOPs, layer norm 5 FLOPs/element, the GELU
    gate 8 FLOPs/element, softmax 5 FLOPs/score;
  - every block is first counted for the full token grid (T timesteps,
    S = 1+n+m tokens each), then amortized per class logit (integer
    division by n). Reported numbers therefore follow the convention of
    costing a single video-text pair; with n = 1 they are the raw counts.

The "logits" block is the full set of n class affinities, so its
amortized share is exactly one affinity logit. Auxiliary logits guide
training only and are not part of the per-pair inference cost.
"""

from __future__ import annotations

from vctext.head.config import HeadConfig

LN_FLOPS_PER_ELEM = 5
GELU_FLOPS_PER_ELEM = 8
SOFTMAX_FLOPS_PER_SCORE = 5
SIGMOID_FLOPS = 4


def _affinity_flops(dim: int) -> int:
    return 2 * 3 * dim + 4  # dot + two norms as MACs, plus sqrt/div


def _weight_flops(config: HeadConfig, t: int, p: int) -> int:
    """Cost of producing the (t x p) token-weight matrix for one site."""
    mode = config.weighting_mode
    d = config.embed_dim
    if mode == "none":
        return 0
    if mode == "sig_affinity":
        return t * p * (_affinity_flops(d) + SIGMOID_FLOPS + 1)  # +1 gate mul
    if mode == "learned_scalar":
        return SIGMOID_FLOPS + t * p
    # attention: project both sides, then scaled dots
    return 2 * (t + p) * d * d + t * p * (2 * d + 1 + SIGMOID_FLOPS)


def _msa_flops(n_tokens: int, n_seqs: int, seq_len: int, d: int, heads: int) -> int:
    """Pre-norm MSA: n_seqs independent softmax-attentions of seq_len tokens."""
    ln = LN_FLOPS_PER_ELEM * n_tokens * d
    qkvo = 2 * 4 * n_tokens * d * d
    scores_qk = 2 * n_seqs * seq_len * seq_len * d
    attn_v = 2 * n_seqs * seq_len * seq_len * d
    softmax = SOFTMAX_FLOPS_PER_SCORE * heads * n_seqs * seq_len * seq_len
    residual = n_tokens * d
    return ln + qkvo + scores_qk + attn_v + softmax + residual


def head_flops_breakdown(config: HeadConfig, n_frames: int) -> dict[str, int]:
    """Per-block FLOPs, amortized per class logit; values sum to head_flops."""
    t = int(n_frames)
    d = config.embed_dim
    s = config.tokens_per_frame
    p = s - 1                          # text tokens per timestep
    n_tok = t * s
    n = config.n_classes
    raw: dict[str, int] = {}

    raw["boost"] = _weight_flops(config, t, p) + (t * p * d if p else 0)

    attn = 0
    if config.attention_mode == "divided":
        attn += config.num_layers * _msa_flops(n_tok, t, s, d, config.num_heads)
        attn += config.num_layers * _msa_flops(n_tok, s, t, d, config.num_heads)
        raw["divided_attention"] = attn
    else:
        raw["joint_attention"] = config.num_layers * _msa_flops(
            n_tok, 1, n_tok, d, config.num_heads)

    reweight = 0
    if config.weighting_mode != "none" and p:
        pool = t * p * d + p * d
        rescale = t * p * d
        reweight = pool + _weight_flops(config, t, p) + rescale
    raw["reweighting"] = config.num_layers * reweight

    hidden = config.mlp_ratio * d
    mlp = (LN_FLOPS_PER_ELEM * n_tok * d
           + 2 * n_tok * d * hidden
           + GELU_FLOPS_PER_ELEM * n_tok * hidden
           + 2 * n_tok * hidden * d
           + n_tok * d)
    raw["mlp"] = config.num_layers * mlp

    k_eff = config.n_categories if config.use_aux else 0
    raw["projection"] = (1 + n + k_eff) * (2 * d * config.proj_dim + config.proj_dim)
    raw["logits"] = n * (_affinity_flops(config.proj_dim) + 1)  # +1 temperature mul

    return {name: value // n for name, value in raw.items()}


def head_flops(config: HeadConfig, n_frames: int) -> int:
    """Total head FLOPs per class logit (one video-text pair)."""
    return sum(head_flops_breakdown(config, n_frames).values())
