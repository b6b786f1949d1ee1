"""Head architecture hyperparameters and ablation toggles."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from vctext.errors import ShapeError

WEIGHTING_MODES = ("sig_affinity", "none", "learned_scalar", "attention")
ATTENTION_MODES = ("divided", "joint")
CLASSIFIER_MODES = ("affinity", "text_only", "visual_only")


@dataclass(frozen=True)
class HeadConfig:
    """Everything the head needs to build parameters and run a forward pass.

    num_layers = 0 is the degenerate pooled baseline: boosted tokens are
    pooled and projected with no attention blocks in between.
    """

    embed_dim: int = 512
    num_layers: int = 4
    num_heads: int = 8
    proj_dim: int = 256
    n_classes: int = 2
    n_aux: int = 0
    n_categories: int = 1
    use_aux: bool = False
    weighting_mode: str = "sig_affinity"
    attention_mode: str = "divided"
    classifier_mode: str = "affinity"
    substitute_backbone_text: bool = False
    substitute_backbone_visual: bool = False
    mlp_ratio: int = field(default=4, repr=False)

    def __post_init__(self):
        if self.embed_dim < 8:
            raise ShapeError(f"embed_dim must be >= 8, got {self.embed_dim}")
        if self.num_heads < 1 or self.embed_dim % self.num_heads != 0:
            raise ShapeError(f"embed_dim {self.embed_dim} not divisible by "
                             f"num_heads {self.num_heads}")
        if self.num_layers < 0:
            raise ShapeError("num_layers must be >= 0")
        if self.proj_dim < 2:
            raise ShapeError("proj_dim must be >= 2")
        if self.n_classes < 2:
            raise ShapeError("n_classes must be >= 2")
        if self.n_aux < 0:
            raise ShapeError("n_aux must be >= 0")
        if self.n_aux > 0 and self.n_categories < 1:
            raise ShapeError("n_categories must be >= 1 when n_aux > 0")
        if self.use_aux and self.n_aux < 1:
            raise ShapeError("use_aux requires n_aux >= 1")
        if self.use_aux and self.n_categories > self.n_aux:
            raise ShapeError("n_categories cannot exceed n_aux")
        if self.weighting_mode not in WEIGHTING_MODES:
            raise ShapeError(f"unknown weighting_mode '{self.weighting_mode}'")
        if self.attention_mode not in ATTENTION_MODES:
            raise ShapeError(f"unknown attention_mode '{self.attention_mode}'")
        if self.classifier_mode not in CLASSIFIER_MODES:
            raise ShapeError(f"unknown classifier_mode '{self.classifier_mode}'")

    @property
    def tokens_per_frame(self) -> int:
        """1 visual + n class-text + (m aux-text if used)."""
        return 1 + self.n_classes + (self.n_aux if self.use_aux else 0)

    def with_overrides(self, **kwargs) -> "HeadConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "HeadConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ShapeError(f"unknown HeadConfig fields: {sorted(unknown)}")
        return cls(**d)
