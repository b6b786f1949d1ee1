"""Metrics oracles, training loop contracts, zero-shot, ablation rows."""

import dataclasses
import itertools

import numpy as np
import pytest

from vctext.dataio import SyntheticSpec, generate_synthetic
from vctext.errors import (
    DegenerateClassError,
    LabelError,
    ShapeError,
    UnknownAblationError,
)
from vctext.evalharness import (
    ABLATION_ROWS,
    TrainConfig,
    ablation_config,
    evaluate,
    mean_average_precision,
    run_ablation_suite,
    top1_accuracy,
    train,
    zero_shot_eval,
)
from vctext.head.config import HeadConfig
from vctext.head.params import init_params
from vctext.numerics import Rng

TOY_HEAD = HeadConfig(embed_dim=8, num_layers=1, num_heads=2, proj_dim=4,
                      n_classes=3, n_aux=2, n_categories=1, use_aux=True)


def toy_data(seed=0, n_classes=3, per_class=6, held_out=2, dim=8, frames=2,
             n_aux=2, n_categories=1, multi=False):
    return generate_synthetic(SyntheticSpec(
        n_classes=n_classes, n_videos_per_class=per_class,
        n_test_per_class=held_out, n_frames=frames, dim=dim,
        separation_angle=0.15, noise=0.2, drift=0.6, n_aux=n_aux,
        n_categories=n_categories, multi_label=multi, seed=seed))


def brute_force_map(scores: np.ndarray, labels: np.ndarray):
    """Direct transcription of the AP definition: rank videos by descending
    score (stable on ties), average precision at each positive rank, then
    average over classes that have positives."""
    aps = []
    for c in range(scores.shape[1]):
        if labels[:, c].sum() == 0:
            continue
        order = sorted(range(len(scores)), key=lambda i: (-scores[i, c], i))
        hits, precisions = 0, []
        for rank, idx in enumerate(order, start=1):
            if labels[idx, c] == 1:
                hits += 1
                precisions.append(hits / rank)
        aps.append(sum(precisions) / len(precisions))
    return sum(aps) / len(aps)


class TestTop1:
    def test_all_correct(self):
        logits = np.eye(4)
        assert top1_accuracy(logits, np.arange(4)) == 1.0

    def test_all_wrong(self):
        logits = np.eye(4)
        assert top1_accuracy(logits, (np.arange(4) + 1) % 4) == 0.0

    def test_counting(self):
        logits = np.array([[2.0, 1.0], [0.0, 1.0], [3.0, 0.0]])
        assert top1_accuracy(logits, np.array([0, 1, 1])) == pytest.approx(2 / 3)

    def test_tie_breaks_to_lowest_index(self):
        logits = np.array([[1.0, 1.0, 1.0]])
        assert top1_accuracy(logits, np.array([0])) == 1.0
        assert top1_accuracy(logits, np.array([1])) == 0.0

    def test_monotone_transform_invariance(self):
        rng = Rng(0)
        for trial in range(50):
            logits = rng.split(f"l{trial}").normal((6, 4))
            labels = rng.split(f"y{trial}").integers(0, 4, size=6)
            base = top1_accuracy(logits, labels)
            assert top1_accuracy(3.0 * logits + 1.0, labels) == base
            assert top1_accuracy(np.exp(logits), labels) == base

    def test_label_validation(self):
        with pytest.raises(LabelError):
            top1_accuracy(np.eye(3), np.array([0.5, 1.0, 2.0]))
        with pytest.raises(LabelError):
            top1_accuracy(np.eye(3), np.array([0, 1, 3]))


class TestMeanAveragePrecision:
    def test_perfect_ranking(self):
        scores = np.array([[0.9], [0.8], [0.1]])
        labels = np.array([[1], [1], [0]])
        assert mean_average_precision(scores, labels).map_value == 1.0

    def test_documented_example(self):
        # labels (1,0,1) under descending scores: AP = (1/1 + 2/3)/2
        scores = np.array([[3.0], [2.0], [1.0]])
        labels = np.array([[1], [0], [1]])
        result = mean_average_precision(scores, labels)
        assert result.map_value == pytest.approx((1.0 + 2.0 / 3.0) / 2, abs=1e-12)
        assert result.map_value == pytest.approx(0.8333, abs=1e-4)

    def test_single_positive_on_top(self):
        scores = np.array([[0.9, 0.1], [0.1, 0.9]])
        labels = np.array([[1, 0], [0, 1]])
        assert mean_average_precision(scores, labels).map_value == 1.0

    def test_skipped_classes_reported(self):
        scores = Rng(1).normal((4, 3))
        labels = np.zeros((4, 3), dtype=int)
        labels[0, 1] = 1
        result = mean_average_precision(scores, labels)
        assert result.skipped_classes == [0, 2]

    def test_all_degenerate_raises(self):
        with pytest.raises(DegenerateClassError):
            mean_average_precision(np.zeros((3, 2)), np.zeros((3, 2), dtype=int))

    def test_matches_brute_force_on_random_instances(self):
        rng = Rng(2)
        for trial in range(300):
            v = 1 + int(rng.split(f"v{trial}").integers(0, 6))
            n = 1 + int(rng.split(f"n{trial}").integers(0, 3))
            scores = np.round(rng.split(f"s{trial}").normal((v, n)), 1)  # ties
            labels = (rng.split(f"y{trial}").uniform((v, n)) < 0.4).astype(int)
            if labels.sum() == 0:
                labels[0, 0] = 1
            got = mean_average_precision(scores, labels).map_value
            assert got == pytest.approx(brute_force_map(scores, labels), abs=1e-12)

    def test_monotone_transform_invariance(self):
        scores = Rng(3).normal((5, 2))
        labels = (Rng(4).uniform((5, 2)) < 0.5).astype(int)
        labels[0, :] = 1
        base = mean_average_precision(scores, labels).map_value
        assert mean_average_precision(np.tanh(scores), labels).map_value \
            == pytest.approx(base, abs=1e-12)


class TestTrain:
    def test_zero_steps_returns_initialization(self):
        data = toy_data()
        tc = TrainConfig(steps=0, batch_size=2, lr_max=1e-3, lr_min=1e-4, seed=0)
        result = train(TOY_HEAD, tc, data)
        fresh = init_params(TOY_HEAD, Rng(0).split("init"))
        for name, p in result.params.items():
            assert np.array_equal(p.data, fresh[name].data), name

    def test_identical_seeds_bitwise_identical_params(self):
        data = toy_data()
        tc = TrainConfig(steps=8, batch_size=2, lr_max=1e-3, lr_min=1e-4, seed=3)
        a = train(TOY_HEAD, tc, data)
        b = train(TOY_HEAD, tc, data)
        for name in a.params:
            assert np.array_equal(a.params[name].data, b.params[name].data), name

    def test_loss_recorded_per_step(self):
        result = train(TOY_HEAD, TrainConfig(steps=5, batch_size=2, lr_max=1e-3,
                                             lr_min=1e-4), toy_data())
        assert len(result.losses) == 5
        assert all(np.isfinite(v) for v in result.losses)

    def test_multi_label_training_runs(self):
        data = toy_data(multi=True)
        tc = TrainConfig(steps=4, batch_size=2, lr_max=1e-3, lr_min=1e-4,
                         loss_mode="multi_label")
        result = train(TOY_HEAD, tc, data)
        metric = evaluate(TOY_HEAD, result.params, data, loss_mode="multi_label")
        assert 0.0 <= metric <= 1.0

    def test_dim_mismatch_rejected(self):
        data = toy_data(dim=16)
        with pytest.raises(ShapeError):
            train(TOY_HEAD, TrainConfig(steps=1, batch_size=1, lr_max=1e-3,
                                        lr_min=1e-4), data)


class TestZeroShot:
    def train_small(self, data, steps=40):
        tc = TrainConfig(steps=steps, batch_size=4, lr_max=1e-3, lr_min=1e-4, seed=0)
        return train(TOY_HEAD, tc, data)

    def test_same_vocabulary_equals_plain_eval(self):
        data = toy_data()
        result = self.train_small(data)
        plain = evaluate(TOY_HEAD, result.params, data)
        zs = zero_shot_eval(TOY_HEAD, result.params, [data])
        assert zs.per_split[0] == pytest.approx(plain)

    def test_identical_splits_have_zero_std(self):
        data = toy_data()
        result = self.train_small(data)
        zs = zero_shot_eval(TOY_HEAD, result.params, [data, data, data])
        assert zs.std == 0.0
        assert zs.mean == pytest.approx(zs.per_split[0])

    def test_class_count_agnostic(self):
        data = toy_data()
        result = self.train_small(data)
        wider = toy_data(seed=5, n_classes=5, per_class=3, held_out=1)
        zs = zero_shot_eval(TOY_HEAD, result.params, [wider])
        assert 0.0 <= zs.per_split[0] <= 1.0

    def test_transfer_beats_chance_on_held_out_classes(self):
        # train on 8 of 10 classes, zero-shot the remaining 2 (one from
        # each of two different anchor pairs; chance = 0.5)
        data = generate_synthetic(SyntheticSpec(
            n_classes=10, n_videos_per_class=14, n_test_per_class=4,
            separation_angle=0.15, noise=0.2))
        train_set = data.subset_classes([0, 1, 2, 3, 4, 5, 8, 9])
        held_out = data.subset_classes([6, 7])
        cfg = TOY_HEAD.with_overrides(embed_dim=32, num_heads=4, n_classes=8,
                                      n_aux=10, n_categories=2, proj_dim=8)
        tc = TrainConfig(steps=60, batch_size=8, lr_max=1e-3, lr_min=1e-4, seed=0)
        result = train(cfg, tc, train_set)
        zs = zero_shot_eval(cfg, result.params, [held_out])
        assert zs.per_split[0] > 0.5

    def test_linear_classifier_rejected(self):
        cfg = TOY_HEAD.with_overrides(classifier_mode="visual_only")
        params = init_params(cfg, Rng(0))
        with pytest.raises(ShapeError):
            zero_shot_eval(cfg, params, [toy_data()])


class TestAblationRows:
    def test_seven_named_rows_plus_full(self):
        assert set(ABLATION_ROWS) == {
            "full", "No Aux. Text", "w/ CLIP Visual emb.", "w/ CLIP Text emb.",
            "No Affinity weighting", "w/ joint-attention", "Text Classifier",
            "Visual Classifier"}

    def test_each_row_differs_by_exactly_one_field(self):
        base = ablation_config(TOY_HEAD, "full")
        for name in ABLATION_ROWS:
            if name == "full":
                continue
            cfg = ablation_config(TOY_HEAD, name)
            diffs = [f.name for f in dataclasses.fields(HeadConfig)
                     if getattr(cfg, f.name) != getattr(base, f.name)]
            assert len(diffs) == 1, (name, diffs)

    def test_specific_toggles(self):
        assert ablation_config(TOY_HEAD, "No Affinity weighting").weighting_mode \
            == "none"
        assert ablation_config(TOY_HEAD, "w/ joint-attention").attention_mode \
            == "joint"

    def test_unknown_row_rejected(self):
        with pytest.raises(UnknownAblationError):
            ablation_config(TOY_HEAD, "No Such Row")

    def test_suite_runs_all_rows_and_serializes(self):
        data = toy_data()
        tc = TrainConfig(steps=3, batch_size=2, lr_max=1e-3, lr_min=1e-4)
        table = run_ablation_suite(list(ABLATION_ROWS), TOY_HEAD, tc, data)
        assert [r["row"] for r in table.rows] == list(ABLATION_ROWS)
        assert all(0.0 <= r["metric"] <= 1.0 for r in table.rows)
        jsonl = table.to_json_lines()
        assert len(jsonl.strip().splitlines()) == len(ABLATION_ROWS)
        text = table.to_text()
        assert "No Affinity weighting" in text

    def test_empty_row_set_gives_header_only_table(self):
        table = run_ablation_suite([], TOY_HEAD,
                                   TrainConfig(steps=1, batch_size=1,
                                               lr_max=1e-3, lr_min=1e-4),
                                   toy_data())
        assert table.rows == []
        assert table.to_json_lines() == ""
        assert len(table.to_text().strip().splitlines()) == 2  # header + rule
