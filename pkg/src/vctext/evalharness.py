"""Training loop, metrics, zero-shot protocol and the ablation switchboard."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from vctext.dataio import BundleSet, EmbeddingBundle, multi_view_split
from vctext.errors import (
    DegenerateClassError,
    DivergenceError,
    LabelError,
    ShapeError,
    UnknownAblationError,
)
from vctext.head.config import HeadConfig
from vctext.head.model import classify, head_forward, loss
from vctext.head.params import (
    clamp_temperature,
    init_params,
    no_decay_names,
    zero_grads,
)
from vctext.numerics.optim import adam_step, init_optimizer
from vctext.numerics.rng import Rng
from vctext.numerics.tensor import Tensor, no_grad


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 300
    batch_size: int = 8
    lr_max: float = 3e-3
    lr_min: float = 1e-4
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    aux_weight: float = 0.1
    seed: int = 0
    loss_mode: str = "single_label"
    eval_every: int = 0

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1:
            raise ShapeError("need steps >= 0 and batch_size >= 1")
        if not (self.lr_max >= self.lr_min > 0):
            raise ShapeError("need lr_max >= lr_min > 0")
        if self.loss_mode not in ("single_label", "multi_label"):
            raise LabelError(f"unknown loss mode '{self.loss_mode}'")


@dataclass
class TrainResult:
    params: dict[str, Tensor]
    losses: list[float]
    eval_trace: list[tuple[int, float]] = field(default_factory=list)


def _check_compat(config: HeadConfig, data: BundleSet) -> None:
    if data.dim != config.embed_dim:
        raise ShapeError(f"bundle dim {data.dim} != head embed_dim {config.embed_dim}")
    if data.n_classes != config.n_classes:
        raise ShapeError(f"bundle has {data.n_classes} classes, head expects "
                         f"{config.n_classes}")
    if config.use_aux:
        if data.n_aux != config.n_aux:
            raise ShapeError(f"bundle has {data.n_aux} aux prompts, head expects "
                             f"{config.n_aux}")
        if data.n_categories != config.n_categories:
            raise ShapeError("aux category counts differ")


def _label_array(bundles: list[EmbeddingBundle], mode: str) -> np.ndarray:
    if mode == "single_label":
        return np.asarray([int(b.label) for b in bundles], dtype=np.int64)
    return np.stack([np.asarray(b.label, dtype=np.float64) for b in bundles])


def _batched_loss(config: HeadConfig, params: dict[str, Tensor], data: BundleSet,
                  bundles: list[EmbeddingBundle], loss_mode: str,
                  aux_weight: float) -> Tensor:
    """Loss over a batch; falls back to a fixed-order mean when T varies."""
    uniform = len({b.n_frames for b in bundles}) == 1
    labels = _label_array(bundles, loss_mode)
    if uniform:
        frames = Tensor(np.stack([b.frames.astype(np.float64) for b in bundles]))
        out = head_forward(config, params, frames, data.class_text,
                           data.aux_text, data.aux_categories)
        return loss(classify(out, params, config), labels, loss_mode, aux_weight)
    total = None
    for i, b in enumerate(bundles):
        out = head_forward(config, params, Tensor(b.frames.astype(np.float64)),
                           data.class_text, data.aux_text, data.aux_categories)
        term = loss(classify(out, params, config), labels[i], loss_mode, aux_weight)
        total = term if total is None else total + term
    return total * (1.0 / len(bundles))


def train(head_cfg: HeadConfig, train_cfg: TrainConfig, data: BundleSet,
          checkpoint_path: str | None = None) -> TrainResult:
    """Seeded, deterministic AdamW training on the 'train' split.

    The substitute_backbone_* toggles are evaluation-time replacements
    (the correspondence with raw backbone embeddings is what the ablation
    measures), so optimization always runs with them disabled.
    """
    _check_compat(head_cfg, data)
    train_mode = head_cfg.with_overrides(substitute_backbone_text=False,
                                         substitute_backbone_visual=False)
    rng = Rng(train_cfg.seed)
    params = init_params(train_mode, rng.split("init"))
    state = init_optimizer(
        params, train_cfg.lr_max, train_cfg.lr_min, max(train_cfg.steps, 1),
        beta1=train_cfg.beta1, beta2=train_cfg.beta2, eps=train_cfg.eps,
        weight_decay=train_cfg.weight_decay, no_decay=no_decay_names(params))
    pool = data.split("train")
    if not pool and train_cfg.steps > 0:
        raise ShapeError("no training bundles")
    batch_rng = rng.split("batches")

    result = TrainResult(params=params, losses=[])
    for step in range(train_cfg.steps):
        idx = batch_rng.integers(0, len(pool), size=train_cfg.batch_size)
        batch = [pool[i] for i in idx]
        zero_grads(params)
        step_loss = _batched_loss(train_mode, params, data, batch,
                                  train_cfg.loss_mode, train_cfg.aux_weight)
        value = step_loss.item()
        if not np.isfinite(value):
            raise DivergenceError(f"loss became non-finite at step {step}")
        step_loss.backward()
        grads = {name: p.grad for name, p in params.items() if p.grad is not None}
        adam_step(params, grads, state)
        clamp_temperature(params)
        result.losses.append(value)
        if train_cfg.eval_every and (step + 1) % train_cfg.eval_every == 0:
            metric = evaluate(head_cfg, params, data, split="test",
                              loss_mode=train_cfg.loss_mode)
            result.eval_trace.append((step + 1, metric))

    if checkpoint_path is not None:
        from vctext.head.checkpoint import save_checkpoint
        save_checkpoint(checkpoint_path, head_cfg, params)
    return result


def predict_logits(head_cfg: HeadConfig, params: dict[str, Tensor],
                   data: BundleSet, bundles: list[EmbeddingBundle],
                   n_views: int = 1, frames_per_view: int | None = None) -> np.ndarray:
    """Post-temperature class logits per bundle, views fused by the mean."""
    rows = []
    with no_grad():
        for b in bundles:
            views = [b] if frames_per_view is None else \
                multi_view_split(b, n_views, frames_per_view)
            view_logits = []
            for v in views:
                out = head_forward(head_cfg, params, Tensor(v.frames.astype(np.float64)),
                                   data.class_text, data.aux_text, data.aux_categories)
                view_logits.append(classify(out, params, head_cfg).class_logits.data)
            rows.append(np.mean(view_logits, axis=0))
    return np.stack(rows)


def evaluate(head_cfg: HeadConfig, params: dict[str, Tensor], data: BundleSet,
             split: str = "test", loss_mode: str = "single_label",
             n_views: int = 1, frames_per_view: int | None = None) -> float:
    """Top-1 accuracy (single-label) or mAP (multi-label) on a split."""
    bundles = data.split(split)
    if not bundles:
        raise ShapeError(f"no bundles in split '{split}'")
    logits = predict_logits(head_cfg, params, data, bundles, n_views, frames_per_view)
    labels = _label_array(bundles, loss_mode)
    if loss_mode == "single_label":
        return top1_accuracy(logits, labels)
    return mean_average_precision(logits, labels).map_value


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def top1_accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax (lowest index on ties) is the label."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.ndim != 1 or len(logits) != len(labels):
        raise LabelError("top1 needs (V, n) logits and (V,) labels")
    if labels.dtype.kind not in "iu":
        raise LabelError("top1 needs integer labels")
    if len(labels) and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise LabelError("label outside class range")
    return float((logits.argmax(axis=1) == labels).mean())


@dataclass
class MapResult:
    map_value: float
    per_class: dict[int, float]
    skipped_classes: list[int]


def mean_average_precision(scores: np.ndarray, labels: np.ndarray) -> MapResult:
    """AP per class (videos ranked by descending score, ties kept in input
    order), averaged over classes that have at least one positive."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape != labels.shape:
        raise LabelError("mAP needs matching (V, n) scores and binary labels")
    if not np.isin(labels, (0, 1)).all():
        raise LabelError("mAP labels must be 0/1")
    per_class: dict[int, float] = {}
    skipped: list[int] = []
    for c in range(scores.shape[1]):
        y = labels[:, c]
        if y.sum() == 0:
            skipped.append(c)
            continue
        order = np.argsort(-scores[:, c], kind="stable")
        ranked = y[order]
        positives = np.flatnonzero(ranked) + 1            # 1-based ranks
        precision_at = np.cumsum(ranked)[positives - 1] / positives
        per_class[c] = float(precision_at.mean())
    if not per_class:
        raise DegenerateClassError("every class lacks positives")
    return MapResult(map_value=float(np.mean(list(per_class.values()))),
                     per_class=per_class, skipped_classes=skipped)


# ---------------------------------------------------------------------------
# zero-shot transfer
# ---------------------------------------------------------------------------

@dataclass
class ZeroShotResult:
    per_split: list[float]
    mean: float
    std: float


def zero_shot_eval(head_cfg: HeadConfig, params: dict[str, Tensor],
                   splits: list[BundleSet], eval_split: str = "test") -> ZeroShotResult:
    """Evaluate trained parameters against unseen class vocabularies.

    The head is class-count agnostic in affinity mode (no parameter shape
    involves n), so each split's own text matrix is consumed unchanged.
    Reports per-split top-1 plus mean and population standard deviation.
    """
    if head_cfg.classifier_mode != "affinity":
        raise ShapeError("zero-shot transfer needs the affinity classifier "
                         "(linear classifiers are tied to the training classes)")
    accs = []
    for data in splits:
        if data.dim != head_cfg.embed_dim:
            raise ShapeError(f"split dim {data.dim} != head dim {head_cfg.embed_dim}")
        cfg = head_cfg.with_overrides(
            n_classes=data.n_classes,
            use_aux=head_cfg.use_aux and data.n_aux == head_cfg.n_aux,
        )
        bundles = data.split(eval_split) or data.bundles
        logits = predict_logits(cfg, params, data, bundles)
        labels = _label_array(bundles, "single_label")
        accs.append(top1_accuracy(logits, labels))
    return ZeroShotResult(per_split=accs, mean=float(np.mean(accs)),
                          std=float(np.std(accs)))


# ---------------------------------------------------------------------------
# ablation switchboard
# ---------------------------------------------------------------------------

# Named rows and the single toggle each one flips relative to the full model.
ABLATION_ROWS: dict[str, dict] = {
    "full": {},
    "No Aux. Text": {"use_aux": False},
    "w/ CLIP Visual emb.": {"substitute_backbone_visual": True},
    "w/ CLIP Text emb.": {"substitute_backbone_text": True},
    "No Affinity weighting": {"weighting_mode": "none"},
    "w/ joint-attention": {"attention_mode": "joint"},
    "Text Classifier": {"classifier_mode": "text_only"},
    "Visual Classifier": {"classifier_mode": "visual_only"},
}


def ablation_config(base: HeadConfig, row_name: str) -> HeadConfig:
    if row_name not in ABLATION_ROWS:
        raise UnknownAblationError(
            f"unknown ablation row '{row_name}'; known rows: "
            f"{', '.join(ABLATION_ROWS)}")
    return base.with_overrides(**ABLATION_ROWS[row_name])


@dataclass
class AblationTable:
    rows: list[dict]

    def to_json_lines(self) -> str:
        import json
        return "".join(json.dumps(row, sort_keys=True) + "\n" for row in self.rows)

    def to_text(self) -> str:
        header = f"{'row':<24} {'metric':>8} {'final_loss':>11} {'steps':>6} {'seed':>5}"
        lines = [header, "-" * len(header)]
        for row in self.rows:
            lines.append(f"{row['row']:<24} {row['metric']:>8.4f} "
                         f"{row['final_loss']:>11.4f} {row['steps']:>6d} "
                         f"{row['seed']:>5d}")
        return "\n".join(lines) + "\n"


def run_ablation_suite(row_names: list[str], head_cfg: HeadConfig,
                       train_cfg: TrainConfig, data: BundleSet) -> AblationTable:
    """Train and evaluate one row per named toggle set."""
    rows = []
    for name in row_names:
        cfg = ablation_config(head_cfg, name)
        result = train(cfg, train_cfg, data)
        metric = evaluate(cfg, result.params, data, split="test",
                          loss_mode=train_cfg.loss_mode)
        rows.append({
            "row": name,
            "metric": metric,
            "final_loss": result.losses[-1] if result.losses else float("nan"),
            "steps": train_cfg.steps,
            "seed": train_cfg.seed,
            "config": cfg.to_dict(),
        })
    return AblationTable(rows=rows)
