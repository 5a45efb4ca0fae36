import numpy as np
import pytest

from whittle.dataset import SynthConfig, synthesize_dataset
from whittle.ranker import (
    AttributeModel,
    CalibrationError,
    HingeClassifier,
    PairwiseRankSVM,
    ResponseSigmoid,
    TrainConfig,
    fit_equal_sigmoid,
    fit_order_sigmoid,
    predict_attribute,
    response_probabilities,
    response_probability_matrix,
    sigmoid_neg,
    train_attribute_ranker,
)


def intercept_only_fit(targets):
    """Independent oracle: 1-D Newton on the intercept-only smoothed NLL.

    The MLE probability of an intercept-only logistic model is the mean
    smoothed target, so this is closed-form.
    """
    return float(np.mean(targets))


class TestPairwiseRankSVM:
    def test_single_pair_sign_forced(self):
        X = np.array([[2.0], [1.0]])
        w, rate = train_attribute_ranker([(0, 1)], X)
        assert w[0] > 0
        assert rate == 0.0

    def test_separable_synthetic_zero_violations(self):
        manifest = synthesize_dataset(
            SynthConfig(
                n_images=150, dim=5, n_attributes=1, n_classes=5,
                pairs_per_attribute=200, noise_sd=0.0, seed=2,
            )
        )
        X = manifest.features_matrix()
        pairs = manifest.ordered_pairs(0)
        est = PairwiseRankSVM(seed=2).fit(X, pairs)
        # exhaustive oracle over every training pair
        scores = X @ est.coef_
        violations = sum(1 for i, j in pairs if scores[i] <= scores[j])
        assert violations == 0
        assert est.violation_rate_ == 0.0

    def test_contradictory_pairs_half_violated(self):
        X = np.array([[0.0, 1.0], [1.0, 0.0]])
        est = PairwiseRankSVM(seed=3).fit(X, [(0, 1), (1, 0)])
        assert np.isfinite(est.coef_).all()
        assert est.violation_rate_ == 0.5

    def test_objective_nonincreasing(self, rng):
        X = rng.normal(size=(40, 4))
        pairs = np.stack([rng.permutation(40)[:20], rng.permutation(40)[:20]], axis=1)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        est = PairwiseRankSVM().fit(X, pairs)
        curve = np.array(est.objective_curve_)
        assert (np.diff(curve) <= 0).all()

    def test_errors(self):
        with pytest.raises(ValueError, match="empty"):
            PairwiseRankSVM().fit(np.ones((3, 2)), np.empty((0, 2), dtype=int))
        with pytest.raises(ValueError, match="non-finite"):
            PairwiseRankSVM().fit(np.array([[np.nan, 0.0], [0.0, 1.0]]), [(0, 1)])

    def test_get_params_roundtrip(self):
        est = PairwiseRankSVM(C=0.5, epochs=10)
        params = est.get_params()
        assert params["C"] == 0.5
        clone = PairwiseRankSVM(**params)
        assert clone.epochs == 10


class TestPredictAttribute:
    def test_inner_product(self):
        assert predict_attribute([1.0, 2.0], [3.0, 4.0]) == 11.0

    def test_zero_weights(self, rng):
        x = rng.normal(size=5)
        assert predict_attribute(np.zeros(5), x) == 0.0

    def test_linearity(self, rng):
        w = rng.normal(size=6)
        for _ in range(20):
            x1, x2 = rng.normal(size=6), rng.normal(size=6)
            lhs = predict_attribute(w, x1 + x2)
            rhs = predict_attribute(w, x1) + predict_attribute(w, x2)
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            predict_attribute([1.0, 2.0], [1.0, 2.0, 3.0])


class TestOrderSigmoid:
    def test_symmetric_data(self):
        alpha, beta = fit_order_sigmoid([1.0, -1.0], [True, False])
        assert beta == pytest.approx(0.0, abs=1e-6)
        p_half = sigmoid_neg(alpha * 0.0 + beta)
        assert p_half == pytest.approx(0.5, abs=1e-6)
        assert alpha < 0

    def test_random_labels_match_intercept_only_oracle(self, rng):
        deltas = rng.normal(size=2000)
        labels = rng.random(2000) < 0.6
        alpha, beta = fit_order_sigmoid(deltas, labels)
        # |alpha| fluctuates at O(1/sqrt(n)); 0.05 is ~3 sampling SDs at n=2000
        assert abs(alpha) < 0.05
        n_pos = int(labels.sum())
        n_neg = len(labels) - n_pos
        targets = np.where(labels, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
        expected = intercept_only_fit(targets)
        probe = np.linspace(-3, 3, 50)
        fitted = sigmoid_neg(alpha * probe + beta)
        assert np.abs(fitted - expected).max() < 0.05
        assert abs(expected - labels.mean()) < 0.01

    def test_scaling_invariance(self, rng):
        deltas = rng.normal(size=500)
        labels = deltas + 0.3 * rng.normal(size=500) > 0
        alpha1, beta1 = fit_order_sigmoid(deltas, labels)
        alpha10, beta10 = fit_order_sigmoid(deltas * 10.0, labels)
        assert alpha10 == pytest.approx(alpha1 / 10.0, rel=1e-4)
        probe = rng.normal(size=200)
        p1 = sigmoid_neg(alpha1 * probe + beta1)
        p10 = sigmoid_neg(alpha10 * (probe * 10.0) + beta10)
        np.testing.assert_allclose(p1, p10, atol=1e-6)

    def test_degenerate_labels(self):
        with pytest.raises(CalibrationError, match="degenerate"):
            fit_order_sigmoid([1.0, 2.0], [True, True])


class TestEqualSigmoid:
    def test_constructed_two_hundred_sample_set(self, rng):
        equal_abs = np.abs(rng.normal(0.0, 0.05, size=100))
        ordered_abs = 2.0 + 0.1 * rng.normal(size=100)
        z = np.concatenate([equal_abs, ordered_abs])
        labels = np.concatenate([np.ones(100, bool), np.zeros(100, bool)])
        gamma, delta = fit_equal_sigmoid(z, labels)
        assert gamma > 0
        assert sigmoid_neg(gamma * 0.0 + delta) > 0.9
        assert sigmoid_neg(gamma * 2.0 + delta) < 0.1

    def test_all_equal_is_degenerate(self):
        with pytest.raises(CalibrationError, match="degenerate"):
            fit_equal_sigmoid([0.1, 0.2], [True, True])

    def test_monotone_nonincreasing(self, rng):
        gamma, delta = fit_equal_sigmoid(
            np.concatenate([np.abs(rng.normal(0, 0.1, 50)), 1 + np.abs(rng.normal(0, 0.3, 50))]),
            np.concatenate([np.ones(50, bool), np.zeros(50, bool)]),
        )
        grid = np.linspace(0.0, 5.0, 200)
        probs = sigmoid_neg(gamma * grid + delta)
        assert (np.diff(probs) <= 0).all()


@pytest.fixture(scope="module")
def calibrated_model(small_ctx):
    return small_ctx.models[0]


class TestResponseProbabilities:
    def test_zero_delta_symmetry(self, calibrated_model):
        a = 1.234
        p_more, p_less, p_equal = response_probabilities(calibrated_model, a, a)
        assert p_more == pytest.approx(p_less, abs=1e-12)

    def test_large_delta_limit(self, calibrated_model):
        scale = np.abs(1.0 / calibrated_model.alpha)
        p_more, p_less, p_equal = response_probabilities(calibrated_model, 50 * scale, 0.0)
        assert p_more > 0.99

    def test_sum_to_one(self, calibrated_model, rng):
        deltas = rng.normal(scale=3.0, size=1000)
        probs = response_probability_matrix(calibrated_model, deltas)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert (probs >= 0).all() and (probs <= 1).all()
        # strictly interior away from float64 sigmoid saturation
        moderate = np.abs(deltas) <= 2.0 / abs(calibrated_model.alpha)
        interior = response_probability_matrix(calibrated_model, deltas[moderate])
        assert (interior > 0).all() and (interior < 1).all()

    def test_uncalibrated_model_rejected(self):
        bare = AttributeModel(attribute=0, weights=np.ones(3))
        with pytest.raises(CalibrationError, match="not calibrated"):
            response_probabilities(bare, 1.0, 0.0)


class TestHingeClassifier:
    def test_separable_classification(self, rng):
        X = np.vstack([rng.normal(loc=2.0, size=(30, 3)), rng.normal(loc=-2.0, size=(30, 3))])
        y = np.array([1.0] * 30 + [-1.0] * 30)
        clf = HingeClassifier().fit(X, y)
        decision = clf.decision_function(X)
        assert ((decision > 0) == (y > 0)).mean() == 1.0

    def test_label_validation(self):
        with pytest.raises(ValueError, match="labels"):
            HingeClassifier().fit(np.ones((2, 2)), [0.0, 2.0])
