"""Loss and sampling oracles: brute-force pair enumeration, hand values, gradients."""

import math

import numpy as np
import pytest
import torch

from numcue.modeling import (
    LossError,
    class_weight_tensor,
    classification_loss,
    contrastive_loss,
    sample_weights,
    weighted_sampler,
)


def brute_force_contrastive(z1, z2, l1, l2, margin, scale, conventional=False):
    """Independent double-loop scalar evaluation of the pairwise loss."""
    total = 0.0
    for i, a in enumerate(z1):
        na = math.sqrt(sum(x * x for x in a))
        for j, b in enumerate(z2):
            nb = math.sqrt(sum(y * y for y in b))
            s = sum(x * y for x, y in zip(a, b)) / (na * nb)
            same = l1[i] == l2[j]
            w = math.exp(scale) if same else 1.0
            if conventional:
                term = (1.0 - s) ** 2 if same else max(0.0, s - margin) ** 2
            else:
                term = max(0.0, margin - s) ** 2
            total += w * term
    return total / (len(z1) * len(z2))


def t(x):
    return torch.tensor(x, dtype=torch.float64)


class TestContrastiveLoss:
    def test_identical_pair_above_margin_is_zero(self):
        loss = contrastive_loss(t([[1.0, 0.0]]), t([[1.0, 0.0]]), t([1.0]), t([1.0]))
        assert float(loss) == 0.0

    def test_orthogonal_negative_pair_hand_value(self):
        # cosine 0, different labels -> weight 1, term (0.5 - 0)^2 = 0.25
        loss = contrastive_loss(
            t([[1.0, 0.0]]), t([[0.0, 1.0]]), t([1.0]), t([0.0]), margin=0.5, scale=1.0
        )
        assert float(loss) == pytest.approx(0.25, abs=1e-12)

    def test_orthogonal_positive_pair_weighted(self):
        # same label upweights the 0.25 hinge by e^1
        loss = contrastive_loss(
            t([[1.0, 0.0]]), t([[0.0, 1.0]]), t([1.0]), t([1.0]), margin=0.5, scale=1.0
        )
        assert float(loss) == pytest.approx(math.exp(1.0) * 0.25, rel=1e-12)

    @pytest.mark.parametrize("conventional", [False, True])
    def test_matches_brute_force_on_random_batches(self, conventional):
        rng = np.random.default_rng(17)
        for _ in range(50):
            n1, n2 = int(rng.integers(1, 9)), int(rng.integers(1, 9))
            d = int(rng.integers(1, 17))
            z1 = rng.normal(size=(n1, d))
            z2 = rng.normal(size=(n2, d))
            l1 = rng.choice([0.0, 0.5, 1.0], size=n1)
            l2 = rng.choice([0.0, 0.5, 1.0], size=n2)
            margin = float(rng.uniform(0.1, 0.9))
            scale = float(rng.uniform(0.2, 2.0))
            ours = float(
                contrastive_loss(
                    t(z1), t(z2), t(l1), t(l2),
                    margin=margin, scale=scale, conventional=conventional,
                )
            )
            ref = brute_force_contrastive(
                z1.tolist(), z2.tolist(), l1.tolist(), l2.tolist(),
                margin, scale, conventional,
            )
            assert ours == pytest.approx(ref, abs=1e-6)

    def test_zero_norm_rejected(self):
        with pytest.raises(LossError, match="zero-norm"):
            contrastive_loss(t([[0.0, 0.0]]), t([[1.0, 0.0]]), t([1.0]), t([1.0]))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(LossError):
            contrastive_loss(t([[1.0, 0.0]]), t([[1.0, 0.0, 0.0]]), t([1.0]), t([1.0]))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(23)
        eps = 1e-4
        checked = 0
        while checked < 20:
            n1, n2, d = 3, 4, 5
            z1 = torch.tensor(rng.normal(size=(n1, d)), requires_grad=True)
            z2 = t(rng.normal(size=(n2, d)))
            l1 = t(rng.choice([0.0, 0.5, 1.0], size=n1))
            l2 = t(rng.choice([0.0, 0.5, 1.0], size=n2))
            loss = contrastive_loss(z1, z2, l1, l2, margin=0.6, scale=1.0)
            loss.backward()
            i, j = int(rng.integers(n1)), int(rng.integers(d))
            analytic = float(z1.grad[i, j])
            if abs(analytic) < 1e-6:  # hinge may be flat at the probe
                continue
            base = z1.detach().clone()
            plus, minus = base.clone(), base.clone()
            plus[i, j] += eps
            minus[i, j] -= eps
            f_plus = float(contrastive_loss(plus, z2, l1, l2, margin=0.6, scale=1.0))
            f_minus = float(contrastive_loss(minus, z2, l1, l2, margin=0.6, scale=1.0))
            numeric = (f_plus - f_minus) / (2 * eps)
            assert analytic == pytest.approx(numeric, rel=1e-3)
            checked += 1


class TestSampleWeights:
    def test_inverse_sqrt(self):
        w = sample_weights({0.0: 100})
        assert w[0.0] == pytest.approx(0.1, abs=1e-15)

    def test_ratio(self):
        w = sample_weights({0.0: 100, 1.0: 25})
        assert w[0.0] == pytest.approx(0.1)
        assert w[1.0] == pytest.approx(0.2)

    def test_equal_counts_equal_weights(self):
        w = sample_weights({0.0: 7, 0.5: 7, 1.0: 7})
        assert w[0.0] == w[0.5] == w[1.0]

    def test_weight_times_sqrt_count_is_one(self):
        for count in (1, 4, 81, 1000):
            w = sample_weights({1.0: count})
            assert w[1.0] * math.sqrt(count) == pytest.approx(1.0, abs=1e-12)

    def test_zero_count_rejected(self):
        with pytest.raises(LossError):
            sample_weights({0.0: 0})


class TestWeightedSampler:
    def test_sqrt_proportional_draw_shares(self):
        labels = [0.0] * 81 + [1.0] * 9
        weights = sample_weights({0.0: 81, 1.0: 9})
        idx = weighted_sampler(labels, weights, draws=100_000, seed=3)
        drawn = np.asarray(labels)[idx]
        # expected shares proportional to sqrt(counts): 9 : 3
        assert (drawn == 0.0).mean() == pytest.approx(0.75, abs=0.01)
        assert (drawn == 1.0).mean() == pytest.approx(0.25, abs=0.01)

    def test_single_class(self):
        labels = [0.5] * 10
        idx = weighted_sampler(labels, sample_weights({0.5: 10}), draws=100, seed=1)
        assert all(labels[i] == 0.5 for i in idx)

    def test_deterministic(self):
        labels = [0.0] * 20 + [1.0] * 5
        w = sample_weights({0.0: 20, 1.0: 5})
        a = weighted_sampler(labels, w, draws=500, seed=9)
        b = weighted_sampler(labels, w, draws=500, seed=9)
        np.testing.assert_array_equal(a, b)

    def test_empty_rejected(self):
        with pytest.raises(LossError):
            weighted_sampler([], {}, draws=10)


class TestClassificationLoss:
    def test_class_weight_modes(self):
        labels = np.array([0, 0, 0, 0, 1, 2, 2])
        w = class_weight_tensor(labels, "inverse")
        assert w[1] / w[0] == pytest.approx(4.0)
        w = class_weight_tensor(labels, "inverse_sqrt")
        assert w[1] / w[0] == pytest.approx(2.0)
        assert class_weight_tensor(labels, "none") is None
        with pytest.raises(LossError):
            class_weight_tensor(np.array([0, 0]), "inverse")

    def test_weighted_ce_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(29)
        eps = 1e-4
        weights = torch.tensor([0.5, 2.0, 1.5], dtype=torch.float64)
        for _ in range(20):
            scores = torch.tensor(rng.normal(size=(6, 3)), requires_grad=True)
            targets = torch.tensor(rng.integers(0, 3, size=6))
            loss = classification_loss(scores, targets, weights)
            loss.backward()
            i, j = int(rng.integers(6)), int(rng.integers(3))
            analytic = float(scores.grad[i, j])
            base = scores.detach().clone()
            plus, minus = base.clone(), base.clone()
            plus[i, j] += eps
            minus[i, j] -= eps
            numeric = (
                float(classification_loss(plus, targets, weights))
                - float(classification_loss(minus, targets, weights))
            ) / (2 * eps)
            assert analytic == pytest.approx(numeric, rel=1e-3, abs=1e-9)
