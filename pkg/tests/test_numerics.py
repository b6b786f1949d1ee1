"""Contract tests for affinities, layer norm, attention, optimizer, RNG."""

import math

import numpy as np
import pytest

from vctext.errors import RangeError, ShapeError, ZeroNormError
from vctext.numerics import (
    OptimizerState,
    Rng,
    Tensor,
    adam_step,
    cosine_affinity,
    cosine_lr,
    cosine_matrix,
    grad_check,
    init_optimizer,
    layer_norm,
    multi_head_self_attention,
)


def msa_identity(x, heads=1):
    """MSA with identity Q/K/V/O projections and zero biases."""
    d = x.shape[-1]
    eye = Tensor(np.eye(d))
    zero = Tensor(np.zeros(d))
    return multi_head_self_attention(Tensor(x), eye, zero, eye, zero,
                                     eye, zero, eye, zero, heads).data


class TestCosineAffinity:
    def test_identical_vectors(self):
        assert cosine_affinity(Tensor([3.0, 4.0]), Tensor([3.0, 4.0])).item() \
            == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_affinity(Tensor([1.0, 0.0]), Tensor([0.0, 1.0])).item() \
            == pytest.approx(0.0, abs=1e-15)

    def test_antiparallel(self):
        assert cosine_affinity(Tensor([1.0, 0.0]), Tensor([-2.0, 0.0])).item() \
            == pytest.approx(-1.0)

    def test_scale_invariance(self):
        rng = Rng(3)
        for trial in range(50):
            a = rng.split(f"a{trial}").normal((6,))
            b = rng.split(f"b{trial}").normal((6,))
            s = float(rng.split(f"s{trial}").uniform((), 0.1, 50.0))
            base = cosine_affinity(Tensor(a), Tensor(b)).item()
            scaled = cosine_affinity(Tensor(s * a), Tensor(b)).item()
            assert scaled == pytest.approx(base, abs=1e-12)

    def test_zero_norm_rejected(self):
        with pytest.raises(ZeroNormError):
            cosine_affinity(Tensor([0.0, 0.0]), Tensor([1.0, 0.0]))

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            cosine_affinity(Tensor([1.0, 0.0]), Tensor([1.0, 0.0, 0.0]))

    def test_gradient_matches_central_differences(self):
        b = Tensor(Rng(1).normal((8,)))
        x = Rng(2).normal((8,))
        x = Tensor(x / np.linalg.norm(x))
        assert grad_check(lambda t: cosine_affinity(t, b), x, h=1e-5) < 1e-6

    def test_linear_function_gradient_exact(self):
        c = Tensor(Rng(4).normal((5,)))
        err = grad_check(lambda t: (c * t).sum(), Tensor(Rng(5).normal((5,))))
        assert err < 1e-10

    def test_matrix_form_matches_pairwise(self):
        a = Rng(6).normal((3, 5))
        b = Rng(7).normal((4, 5))
        mat = cosine_matrix(Tensor(a), Tensor(b)).data
        for i in range(3):
            for j in range(4):
                pair = cosine_affinity(Tensor(a[i]), Tensor(b[j])).item()
                assert mat[i, j] == pytest.approx(pair, abs=1e-12)


class TestLayerNorm:
    def ln(self, x, gamma=None, beta=None):
        d = np.asarray(x).shape[-1]
        gamma = np.ones(d) if gamma is None else gamma
        beta = np.zeros(d) if beta is None else beta
        return layer_norm(Tensor(x), Tensor(gamma), Tensor(beta)).data

    def test_constant_row_is_zeroed(self):
        out = self.ln(np.full((2, 4), 7.0))
        assert np.allclose(out, 0.0)

    def test_two_point_row(self):
        # direct formula: mean 0, var 1 -> (1,-1)/sqrt(1+1e-5)
        expected = np.array([1.0, -1.0]) / math.sqrt(1.0 + 1e-5)
        assert np.allclose(self.ln(np.array([[1.0, -1.0]])), expected, atol=1e-12)

    def test_zero_gamma_gives_beta(self):
        out = self.ln(Rng(0).normal((3, 5)), gamma=np.zeros(5), beta=np.full(5, 2.5))
        assert np.allclose(out, 2.5)

    def test_standardizes_random_rows(self):
        for trial in range(200):
            x = Rng(trial).normal((4, 8)) * (1 + trial % 5)
            # keep row variance away from the 1e-5 epsilon floor, which is
            # what "excluding constant rows" is about
            x = x / x.std(axis=-1, keepdims=True)
            out = self.ln(x)
            assert np.abs(out.mean(axis=-1)).max() < 1e-4
            assert np.abs(out.var(axis=-1) - 1.0).max() < 1e-4

    def test_gradient(self):
        gamma, beta = Tensor(Rng(8).normal((6,))), Tensor(Rng(9).normal((6,)))

        def f(t):
            out = layer_norm(t, gamma, beta)
            return (out * out).sum()

        assert grad_check(f, Tensor(Rng(10).normal((3, 6))), h=1e-5) < 1e-6


class TestMultiHeadSelfAttention:
    def test_single_token_softmax_is_identity(self):
        x = Rng(11).normal((1, 4))
        assert np.allclose(msa_identity(x), x, atol=1e-12)

    def test_two_token_hand_oracle(self):
        # independent oracle: explicit softmax(QK^T / sqrt(2)) V with Q=K=V=x
        x = np.array([[1.0, 0.0], [0.0, 1.0]])
        scores = x @ x.T / math.sqrt(2.0)
        ex = np.exp(scores - scores.max(axis=1, keepdims=True))
        expected = (ex / ex.sum(axis=1, keepdims=True)) @ x
        out = msa_identity(x)
        assert np.allclose(out, expected, atol=1e-12)
        # frozen values for row 0 of the oracle above
        assert out[0, 0] == pytest.approx(0.66976, abs=1e-4)
        assert out[0, 1] == pytest.approx(0.33024, abs=1e-4)

    def test_row_permutation_equivariance(self):
        rng = Rng(12)
        for trial in range(200):
            d, s, heads = 8, 5, 2
            x = rng.split(f"x{trial}").normal((s, d))
            ws = [Tensor(rng.split(f"w{trial}{i}").normal((d, d)) * 0.3)
                  for i in range(4)]
            bs = [Tensor(rng.split(f"b{trial}{i}").normal((d,)) * 0.1)
                  for i in range(4)]
            perm = rng.split(f"p{trial}").permutation(s)

            def run(inp):
                return multi_head_self_attention(
                    Tensor(inp), ws[0], bs[0], ws[1], bs[1], ws[2], bs[2],
                    ws[3], bs[3], heads).data

            assert np.allclose(run(x)[perm], run(x[perm]), atol=1e-10)

    def test_indivisible_heads_rejected(self):
        with pytest.raises(ShapeError):
            msa_identity(Rng(13).normal((2, 6)), heads=4)

    def test_gradient_through_attention(self):
        d, s, heads = 6, 4, 3
        rng = Rng(14)
        mats = {name: Tensor(rng.split(name).normal((d, d)) * 0.4,
                             requires_grad=False) for name in "qkvo"}
        zero = Tensor(np.zeros(d))

        def f(t):
            out = multi_head_self_attention(t, mats["q"], zero, mats["k"], zero,
                                            mats["v"], zero, mats["o"], zero, heads)
            return (out * out).sum()

        assert grad_check(f, Tensor(rng.split("x").normal((s, d))), h=1e-5) < 1e-6


class TestAdam:
    def make_state(self, lr=0.01, decay=0.0, total=100):
        return init_optimizer({"p": Tensor(np.zeros(1))}, lr_max=lr, lr_min=lr,
                              total_steps=total, weight_decay=decay)

    def test_zero_gradient_keeps_params(self):
        p = {"p": Tensor(np.array([1.5, -2.0]), requires_grad=True)}
        state = init_optimizer(p, 0.01, 0.01, 10, weight_decay=0.0)
        adam_step(p, {"p": np.zeros(2)}, state)
        assert np.allclose(p["p"].data, [1.5, -2.0])

    def test_first_step_is_signed_lr(self):
        p = {"p": Tensor(np.array([0.3, -0.7]), requires_grad=True)}
        state = init_optimizer(p, 0.01, 0.01, 10, weight_decay=0.0)
        adam_step(p, {"p": np.array([0.25, -4.0])}, state)
        # bias correction at t=1 makes the update -lr * sign(g) (up to eps)
        assert np.allclose(p["p"].data, [0.3 - 0.01, -0.7 + 0.01], atol=1e-7)

    def test_single_step_hand_oracle(self):
        # evaluate the update formula independently
        g, lr, b1, b2, eps = 0.1, 0.01, 0.9, 0.999, 1e-8
        m = (1 - b1) * g / (1 - b1)
        v = (1 - b2) * g * g / (1 - b2)
        expected = 1.0 - lr * m / (math.sqrt(v) + eps)
        p = {"p": Tensor(np.array([1.0]), requires_grad=True)}
        state = init_optimizer(p, lr, lr, 10, weight_decay=0.0)
        adam_step(p, {"p": np.array([g])}, state)
        assert p["p"].data[0] == pytest.approx(expected, abs=1e-10)
        assert p["p"].data[0] == pytest.approx(0.990000001, abs=1e-9)

    def test_decoupled_weight_decay(self):
        p = {"p": Tensor(np.array([2.0]), requires_grad=True)}
        state = init_optimizer(p, 0.1, 0.1, 10, weight_decay=0.5)
        adam_step(p, {"p": np.zeros(1)}, state)
        # zero gradient: only the decay term moves the parameter
        assert p["p"].data[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)

    def test_shape_mismatch(self):
        p = {"p": Tensor(np.zeros(3), requires_grad=True)}
        state = init_optimizer(p, 0.01, 0.01, 10)
        with pytest.raises(ShapeError):
            adam_step(p, {"p": np.zeros(4)}, state)

    def test_step_budget_enforced(self):
        p = {"p": Tensor(np.zeros(1), requires_grad=True)}
        state = init_optimizer(p, 0.01, 0.01, 1)
        adam_step(p, {"p": np.ones(1)}, state)
        with pytest.raises(RangeError):
            adam_step(p, {"p": np.ones(1)}, state)


class TestCosineSchedule:
    def test_endpoints_and_midpoint(self):
        assert cosine_lr(0, 100, 1e-3, 1e-5) == pytest.approx(1e-3)
        assert cosine_lr(100, 100, 1e-3, 1e-5) == pytest.approx(1e-5)
        assert cosine_lr(50, 100, 1e-3, 1e-5) == pytest.approx((1e-3 + 1e-5) / 2)

    def test_monotone_decreasing(self):
        values = [cosine_lr(s, 60, 1.0, 0.01) for s in range(61)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_out_of_range(self):
        with pytest.raises(RangeError):
            cosine_lr(-1, 10, 1e-3, 1e-4)
        with pytest.raises(RangeError):
            cosine_lr(11, 10, 1e-3, 1e-4)


class TestRng:
    def test_equal_seeds_equal_streams(self):
        a, b = Rng(7), Rng(7)
        assert np.array_equal(a.normal((100,)), b.normal((100,)))
        assert np.array_equal(a.permutation(50), b.permutation(50))

    def test_different_seeds_differ(self):
        assert not np.array_equal(Rng(1).normal((50,)), Rng(2).normal((50,)))

    def test_split_streams_are_order_independent(self):
        r1 = Rng(9)
        first = r1.split("alpha").normal((10,))
        r2 = Rng(9)
        _ = r2.split("beta").normal((10,))  # consuming beta must not move alpha
        assert np.array_equal(first, r2.split("alpha").normal((10,)))

    def test_truncated_normal_within_bounds(self):
        draws = Rng(11).truncated_normal((5000,), std=0.02)
        assert np.abs(draws).max() <= 2.0 * 0.02 + 1e-12
