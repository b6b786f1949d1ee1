"""Shipped configuration presets, as flat sectioned key-value maps.

`toy` is the small everything-on config used for gradient checking;
`synth` is the desk-scale default that trains in seconds; the b16/l14
presets record the published head dimensions and paper-scale training
hyperparameters for documentation — desk machines should not expect to
run them as-is over real datasets.
"""

from __future__ import annotations

from vctext.errors import UsageError

PRESETS: dict[str, dict[str, object]] = {
    "toy": {
        "head.embed_dim": 8,
        "head.num_layers": 2,
        "head.num_heads": 2,
        "head.proj_dim": 4,
        "head.n_classes": 3,
        "head.n_aux": 2,
        "head.n_categories": 1,
        "head.use_aux": True,
        "data.n_classes": 3,
        "data.n_videos_per_class": 6,
        "data.n_test_per_class": 2,
        "data.n_frames": 2,
        "data.dim": 8,
        "data.separation_angle": 0.1,
        "data.noise": 0.2,
        "data.drift": 0.6,
        "data.n_aux": 2,
        "data.n_categories": 1,
        "train.steps": 20,
        "train.batch_size": 4,
        "train.lr_max": 1e-3,
        "train.lr_min": 1e-4,
    },
    "synth": {
        "head.embed_dim": 32,
        "head.num_layers": 2,
        "head.num_heads": 4,
        "head.proj_dim": 16,
        "head.n_classes": 10,
        "head.n_aux": 4,
        "head.n_categories": 2,
        "head.use_aux": True,
        "data.n_classes": 10,
        "data.n_videos_per_class": 50,
        "data.n_test_per_class": 10,
        "data.n_frames": 8,
        "data.dim": 32,
        "data.separation_angle": 0.02,
        "data.noise": 0.3,
        "data.drift": 0.8,
        "data.n_aux": 4,
        "data.n_categories": 2,
        "train.steps": 300,
        "train.batch_size": 8,
        "train.lr_max": 3e-3,
        "train.lr_min": 1e-4,
        "train.aux_weight": 0.1,
    },
    # published dimensions; training keys document the paper-scale recipe
    "b16-charades": {
        "head.embed_dim": 512,
        "head.num_layers": 4,
        "head.num_heads": 8,
        "head.proj_dim": 256,
        "head.n_classes": 157,
        "head.n_aux": 97,
        "head.n_categories": 4,
        "head.use_aux": True,
        "data.n_frames": 16,
        "data.dim": 512,
        "train.steps": 50000,
        "train.batch_size": 64,
        "train.lr_max": 5e-4,
        "train.lr_min": 5e-7,
        "train.loss_mode": "multi_label",
    },
    "l14-kinetics": {
        "head.embed_dim": 768,
        "head.num_layers": 4,
        "head.num_heads": 12,
        "head.proj_dim": 256,
        "head.n_classes": 400,
        "head.n_aux": 88,
        "head.n_categories": 3,
        "head.use_aux": True,
        "data.n_frames": 8,
        "data.dim": 768,
        "train.steps": 28125,          # 30 epochs of 240k clips at batch 256
        "train.batch_size": 256,
        "train.lr_max": 8e-5,
        "train.lr_min": 8e-8,
        "train.loss_mode": "single_label",
    },
}


def preset(name: str) -> dict[str, object]:
    if name not in PRESETS:
        raise UsageError(f"unknown preset '{name}'; available: "
                         f"{', '.join(sorted(PRESETS))}")
    return dict(PRESETS[name])
