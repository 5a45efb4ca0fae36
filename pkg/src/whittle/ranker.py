"""Linear attribute rankers and response-probability calibration.

One linear ranking function is trained per attribute from ordered image
pairs with a large-margin hinge objective; two logistic sigmoids are then
fitted per attribute so score differences map to normalized probabilities
of a "more" / "less" / "equally" comparison outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .validation import as_float_matrix, as_float_vector, check_pairs


def sigmoid_neg(z: np.ndarray | float):
    """Numerically stable 1 / (1 + exp(z))."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    return out if out.ndim else float(out)


@dataclass
class TrainConfig:
    C: float = 1.0
    epochs: int = 500
    step_size: float = 0.5
    tolerance: float = 1e-6
    seed: int = 0

    def validate(self) -> None:
        if self.C <= 0:
            raise ValueError("C must be > 0")
        if self.epochs < 1 or self.step_size <= 0 or self.tolerance < 0:
            raise ValueError("invalid solver configuration")


class PairwiseRankSVM(BaseEstimator):
    """Linear ranking function trained on ordered pairs.

    Minimizes 0.5*||w||^2 + C * sum_p weight_p * max(0, 1 - w.(x_i - x_j))
    over pairs (i, j) meaning row i should outscore row j, by full-batch
    subgradient descent with backtracking line search.  Deterministic for a
    fixed seed (the seed only perturbs the starting point off exact zero so
    contradictory constraints resolve to a definite order).

    Attributes after fit: coef_ (d,), violation_rate_ (fraction of training
    pairs with w.x_i <= w.x_j), objective_, n_iter_.
    """

    def __init__(self, C=1.0, epochs=500, step_size=0.5, tolerance=1e-6, seed=0):
        self.C = C
        self.epochs = epochs
        self.step_size = step_size
        self.tolerance = tolerance
        self.seed = seed

    def fit(self, X, pairs, sample_weight=None):
        TrainConfig(self.C, self.epochs, self.step_size, self.tolerance, self.seed).validate()
        X = as_float_matrix(X, "features")
        pairs = check_pairs(pairs, X.shape[0])
        diffs = X[pairs[:, 0]] - X[pairs[:, 1]]
        if sample_weight is None:
            weights = np.ones(len(pairs))
        else:
            weights = as_float_vector(sample_weight, "sample_weight")
            if weights.shape[0] != len(pairs):
                raise ValueError("sample_weight length must match pairs")
            if (weights < 0).any():
                raise ValueError("sample_weight must be >= 0")

        def objective(w):
            margins = 1.0 - diffs @ w
            return 0.5 * w @ w + self.C * float(weights @ np.maximum(margins, 0.0))

        rng = np.random.default_rng(self.seed)
        w = rng.normal(scale=1e-8, size=X.shape[1])
        f = objective(w)
        trace = [f]
        step = float(self.step_size)
        n_iter = 0
        for n_iter in range(1, self.epochs + 1):
            margins = 1.0 - diffs @ w
            active = margins > 0
            grad = w - self.C * (weights[active] @ diffs[active])
            gnorm2 = float(grad @ grad)
            if gnorm2 == 0.0:
                break
            accepted = False
            while step > 1e-14:
                cand = w - step * grad
                fc = objective(cand)
                if fc <= f - 1e-4 * step * gnorm2:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            improvement = f - fc
            w, f = cand, fc
            trace.append(f)
            step *= 1.25
            if improvement <= self.tolerance * max(abs(f), 1.0):
                break

        self.coef_ = w
        self.objective_ = f
        self.objective_curve_ = trace
        self.n_iter_ = n_iter
        scores = X @ w
        self.violation_rate_ = float(np.mean(scores[pairs[:, 0]] <= scores[pairs[:, 1]]))
        return self

    def predict(self, X):
        X = as_float_matrix(X, "features")
        if X.shape[1] != self.coef_.shape[0]:
            raise ValueError(
                f"dimension mismatch: model has d={self.coef_.shape[0]}, got {X.shape[1]}"
            )
        return X @ self.coef_


class HingeClassifier(BaseEstimator):
    """Linear SVM by the same subgradient machinery, for binary feedback.

    Minimizes 0.5*||w||^2 + C * sum_i max(0, 1 - y_i * (w.x_i + b)) with the
    bias folded in as an augmented constant feature.
    """

    def __init__(self, C=1.0, epochs=500, step_size=0.5, tolerance=1e-6, seed=0):
        self.C = C
        self.epochs = epochs
        self.step_size = step_size
        self.tolerance = tolerance
        self.seed = seed

    def fit(self, X, y):
        X = as_float_matrix(X, "X")
        y = np.asarray(y, dtype=np.float64)
        if set(np.unique(y)) - {-1.0, 1.0}:
            raise ValueError("labels must be in {-1, +1}")
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y length mismatch")
        aug = np.hstack([X, np.ones((X.shape[0], 1))])
        signed = aug * y[:, None]

        def objective(w):
            return 0.5 * w @ w + self.C * float(np.maximum(1.0 - signed @ w, 0.0).sum())

        rng = np.random.default_rng(self.seed)
        w = rng.normal(scale=1e-8, size=aug.shape[1])
        f = objective(w)
        step = float(self.step_size)
        for _ in range(self.epochs):
            active = (1.0 - signed @ w) > 0
            grad = w - self.C * signed[active].sum(axis=0)
            gnorm2 = float(grad @ grad)
            if gnorm2 == 0.0:
                break
            accepted = False
            while step > 1e-14:
                cand = w - step * grad
                fc = objective(cand)
                if fc <= f - 1e-4 * step * gnorm2:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            improvement = f - fc
            w, f = cand, fc
            step *= 1.25
            if improvement <= self.tolerance * max(abs(f), 1.0):
                break
        self.coef_ = w[:-1]
        self.intercept_ = float(w[-1])
        return self

    def decision_function(self, X):
        X = as_float_matrix(X, "X")
        return X @ self.coef_ + self.intercept_


def train_attribute_ranker(ordered_pairs, features, config: TrainConfig | None = None):
    """Fit one attribute's ranking weights; returns (weights, violation_rate)."""
    config = config or TrainConfig()
    est = PairwiseRankSVM(
        C=config.C,
        epochs=config.epochs,
        step_size=config.step_size,
        tolerance=config.tolerance,
        seed=config.seed,
    ).fit(features, ordered_pairs)
    return est.coef_, est.violation_rate_


def predict_attribute(weights, features_row) -> float:
    weights = as_float_vector(weights, "weights")
    row = as_float_vector(features_row, "features_row")
    if weights.shape != row.shape:
        raise ValueError(f"dimension mismatch: {weights.shape} vs {row.shape}")
    return float(weights @ row)


class CalibrationError(ValueError):
    pass


class ResponseSigmoid(BaseEstimator):
    """Two-parameter logistic map P(positive | z) = 1 / (1 + exp(a*z + b)).

    Fitted by damped Newton iterations on the negative log-likelihood with
    one pseudo-count of label smoothing per class, so separable calibration
    sets keep finite parameters.
    """

    def __init__(self, max_iter=100, tol=1e-12):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, z, y):
        z = as_float_vector(z, "z")
        y = np.asarray(y, dtype=bool)
        if y.shape != z.shape:
            raise ValueError("z and y must have equal length")
        n_pos = int(y.sum())
        n_neg = int(y.size - n_pos)
        if n_pos == 0 or n_neg == 0:
            raise CalibrationError("degenerate labels: need at least one positive and one negative")
        # smoothed targets, one pseudo-count per class
        t = np.where(y, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

        def nll(theta):
            p = sigmoid_neg(theta[0] * z + theta[1])
            p = np.clip(p, 1e-300, 1 - 1e-16)
            return -float(t @ np.log(p) + (1 - t) @ np.log1p(-p))

        theta = np.array([0.0, np.log((n_neg + 1.0) / (n_pos + 1.0))])
        f = nll(theta)
        converged = False
        for it in range(1, self.max_iter + 1):
            p = sigmoid_neg(theta[0] * z + theta[1])
            resid = t - p
            grad = np.array([resid @ z, resid.sum()])
            if np.abs(grad).max() < 1e-10:
                converged = True
                break
            r = p * (1 - p)
            h11 = float(r @ (z * z))
            h12 = float(r @ z)
            h22 = float(r.sum())
            hess = np.array([[h11, h12], [h12, h22]]) + 1e-12 * np.eye(2)
            direction = np.linalg.solve(hess, grad)
            lam = 1.0
            while lam > 1e-12:
                cand = theta - lam * direction
                fc = nll(cand)
                if fc <= f:
                    break
                lam *= 0.5
            if fc > f:
                converged = True  # no descent direction left; at the optimum
                break
            if abs(f - fc) < self.tol * max(abs(f), 1.0):
                theta, f = cand, fc
                converged = True
                break
            theta, f = cand, fc
        if not converged:
            p = sigmoid_neg(theta[0] * z + theta[1])
            resid = float(np.abs(t - p).max())
            raise CalibrationError(
                f"sigmoid fit did not converge in {self.max_iter} iterations (residual {resid:.3e})"
            )
        self.a_, self.b_ = float(theta[0]), float(theta[1])
        self.n_iter_ = it
        return self

    def predict_proba(self, z):
        return sigmoid_neg(self.a_ * np.asarray(z, dtype=np.float64) + self.b_)


def fit_order_sigmoid(score_diffs, labels) -> tuple[float, float]:
    """Fit (alpha, beta) of P(more | delta) from signed score differences.

    ``labels`` are truthy for MORE, falsy for LESS.  Larger delta meaning
    "more" forces the fitted alpha negative.
    """
    est = ResponseSigmoid().fit(score_diffs, labels)
    return est.a_, est.b_


def fit_equal_sigmoid(abs_diffs, labels) -> tuple[float, float]:
    """Fit (gamma, delta) of P(equal | |delta|); labels truthy for EQUAL."""
    diffs = as_float_vector(abs_diffs, "abs_diffs")
    if (diffs < 0).any():
        raise ValueError("abs_diffs must be non-negative")
    est = ResponseSigmoid().fit(diffs, labels)
    return est.a_, est.b_


@dataclass
class AttributeModel:
    """One attribute's ranking weights plus calibration parameters."""

    attribute: int
    weights: np.ndarray
    alpha: float = float("nan")
    beta: float = float("nan")
    gamma: float = float("nan")
    delta: float = float("nan")
    train_violation_rate: float = 0.0

    @property
    def calibrated(self) -> bool:
        return (
            math.isfinite(self.alpha)
            and math.isfinite(self.beta)
            and math.isfinite(self.gamma)
            and math.isfinite(self.delta)
        )

    def scores(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights


def response_probability_matrix(model: AttributeModel, deltas) -> np.ndarray:
    """Normalized (more, less, equal) probabilities for score differences.

    Rows of the returned (n, 3) matrix sum to 1.  ``deltas`` holds
    a_m(candidate) - a_m(reference) values.
    """
    if not model.calibrated:
        raise CalibrationError(f"attribute {model.attribute} model is not calibrated")
    deltas = np.atleast_1d(np.asarray(deltas, dtype=np.float64))
    s_more = sigmoid_neg(model.alpha * deltas + model.beta)
    s_less = sigmoid_neg(-(model.alpha * deltas + model.beta))
    s_equal = sigmoid_neg(model.gamma * np.abs(deltas) + model.delta)
    total = s_more + s_less + s_equal
    return np.stack([s_more / total, s_less / total, s_equal / total], axis=1)


def response_probabilities(model: AttributeModel, a_i: float, a_ref: float):
    """(p_more, p_less, p_equal) for one candidate/reference score pair."""
    if not model.calibrated:
        raise CalibrationError(f"attribute {model.attribute} model is not calibrated")
    delta = float(a_i) - float(a_ref)
    s_more = _scalar_sigmoid_neg(model.alpha * delta + model.beta)
    s_less = _scalar_sigmoid_neg(-(model.alpha * delta + model.beta))
    s_equal = _scalar_sigmoid_neg(model.gamma * abs(delta) + model.delta)
    total = s_more + s_less + s_equal
    return s_more / total, s_less / total, s_equal / total


def _scalar_sigmoid_neg(z: float) -> float:
    if z >= 0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


def calibrate_attribute_model(
    model: AttributeModel,
    attr_values: np.ndarray,
    ordered_pairs: np.ndarray,
    equal_pairs: np.ndarray,
) -> AttributeModel:
    """Fill in the four sigmoid parameters from training pairs.

    Order sigmoid: each ordered pair (i succ j) contributes a positive
    instance at delta = a(i) - a(j) and a negative instance at the mirrored
    difference.  Equal sigmoid: |delta| of EQUAL pairs are positives,
    |delta| of ordered pairs negatives.
    """
    if len(ordered_pairs) == 0:
        raise CalibrationError("cannot calibrate without ordered pairs")
    pos = attr_values[ordered_pairs[:, 0]] - attr_values[ordered_pairs[:, 1]]
    diffs = np.concatenate([pos, -pos])
    labels = np.concatenate([np.ones(len(pos), bool), np.zeros(len(pos), bool)])
    alpha, beta = fit_order_sigmoid(diffs, labels)

    ordered_abs = np.abs(pos)
    if len(equal_pairs) > 0:
        equal_abs = np.abs(attr_values[equal_pairs[:, 0]] - attr_values[equal_pairs[:, 1]])
    else:
        # no EQUAL supervision: synthesize positives at zero gap so the
        # equal sigmoid still decays with |delta|
        equal_abs = np.zeros(max(2, len(ordered_abs) // 10))
    abs_all = np.concatenate([equal_abs, ordered_abs])
    eq_labels = np.concatenate(
        [np.ones(len(equal_abs), bool), np.zeros(len(ordered_abs), bool)]
    )
    gamma, delta = fit_equal_sigmoid(abs_all, eq_labels)
    model.alpha, model.beta = alpha, beta
    model.gamma, model.delta = gamma, delta
    return model
