"""Active question selection by expected relevance-entropy reduction.

At each round the system may ask the user to compare the target against
one pivot per attribute (the current tree cursors).  The pivot chosen is
the one minimizing the expected post-answer entropy of the per-image
relevance Bernoullis, where the expectation runs over a pluggable model of
the user's likely response.  Evaluating only the <= M cursors keeps each
selection O(M*N).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .dataset import Relation
from .pivots import PivotSet
from .relevance import (
    PROB_CLAMP,
    RESPONSE_COLUMNS,
    RelevanceState,
    SearchContext,
)
from .ranker import response_probabilities, response_probability_matrix

_LOG2 = np.log(2.0)

RESPONSES = (Relation.MORE, Relation.LESS, Relation.EQUAL)


class LikelihoodKind(str, Enum):
    ALL_RELEVANT = "all_relevant"
    MOST_RELEVANT = "most_relevant"
    SIMILAR_QUESTION = "similar_question"


@dataclass
class LikelihoodModel:
    kind: LikelihoodKind = LikelihoodKind.MOST_RELEVANT
    tau_table: Optional[np.ndarray] = None   # (M, M) attribute rank correlations
    distance_scale: Optional[float] = None   # lambda weighting pivot distance

    def __post_init__(self):
        if self.tau_table is not None:
            t = self.tau_table
            if t.ndim != 2 or t.shape[0] != t.shape[1]:
                raise ValueError("tau_table must be square")
            if not np.allclose(t, t.T) or not np.allclose(np.diag(t), 1.0):
                raise ValueError("tau_table must be symmetric with unit diagonal")


@dataclass
class CandidateQuestion:
    pivot_image: int
    attribute: int
    expected_entropy: float
    response_likelihoods: np.ndarray  # (more, less, equal), sums to 1


@dataclass
class SelectionStats:
    """Instrumentation: how many expected-entropy evaluations a call made."""

    expected_entropy_evals: int = 0


class ExhaustedSearchError(RuntimeError):
    """Every attribute tree has bottomed out; no question can be posed."""


def binary_entropy_bits(p: np.ndarray) -> np.ndarray:
    """Elementwise H2(p) in bits with the 0*log(0) = 0 convention."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    interior = (p > 0.0) & (p < 1.0)
    q = p[interior]
    out[interior] = -(q * np.log2(q) + (1.0 - q) * np.log2(1.0 - q))
    return out


def _entropy_from_log(log_p: np.ndarray) -> float:
    """Summed H2 in bits given log-probabilities (reuses log p for p*log p)."""
    p = np.exp(log_p)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = p * log_p + (1.0 - p) * np.log1p(-p)
    terms[~np.isfinite(terms)] = 0.0  # p == 1 (log term 0) and p == 0 both contribute 0
    return float(-terms.sum()) / _LOG2


def entropy(state: RelevanceState) -> float:
    """Total relevance entropy in bits across all images."""
    return _entropy_from_log(state.log_relevance)


_CHUNK = 512  # images per block; keeps (k, 3, chunk) temporaries cache-resident


def _question_entropies(
    ctx: SearchContext,
    pivot_images: np.ndarray,
    attrs: np.ndarray,
    base: np.ndarray,
) -> np.ndarray:
    """(k, 3) post-answer total entropies in bits for k candidate questions.

    Fused equivalent of: update the state hypothetically with each response
    and sum the per-image binary entropies.  Work proceeds in image blocks
    so temporaries stay in cache; the probability clamp keeps every
    log-prob strictly negative, so p never reaches 0 or 1 exactly and no
    special-casing is needed.  sigmoid(x) is computed as 0.5 - 0.5*tanh(x/2).
    """
    k = len(attrs)
    n = ctx.n_images
    alpha = np.array([ctx.models[m].alpha for m in attrs])[:, None]
    beta = np.array([ctx.models[m].beta for m in attrs])[:, None]
    gamma = np.array([ctx.models[m].gamma for m in attrs])[:, None]
    shift = np.array([ctx.models[m].delta for m in attrs])[:, None]
    pivot_values = ctx.attr_values[pivot_images, attrs][:, None]
    sums = np.zeros((k, 3))
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        values = ctx.attr_values[start:stop, attrs].T  # (k, c)
        deltas = values - pivot_values
        s_more = 0.5 - 0.5 * np.tanh(0.5 * (alpha * deltas + beta))
        s_less = 1.0 - s_more
        s_equal = 0.5 - 0.5 * np.tanh(0.5 * (gamma * np.abs(deltas) + shift))
        total = s_more + s_less + s_equal
        probs = np.stack([s_more, s_less, s_equal], axis=1)  # (k, 3, c)
        probs /= total[:, None, :]
        np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP, out=probs)
        log_p = np.log(probs, out=probs)
        log_p += base[start:stop][None, None, :]
        p = np.exp(log_p)
        terms = p * log_p
        terms += (1.0 - p) * np.log1p(-p)
        sums += terms.sum(axis=2)
    return -sums / _LOG2


def response_likelihood(
    ctx: SearchContext,
    model: LikelihoodModel,
    pivot_image: int,
    attribute: int,
    state: RelevanceState,
) -> np.ndarray:
    """Probability of each user answer (more, less, equal) for a question.

    ALL_RELEVANT weights every image's answer profile by its current
    relevance; MOST_RELEVANT uses the single most relevant image as the
    user's proxy; SIMILAR_QUESTION copies the answer of the most similar
    past question (falling back to MOST_RELEVANT on an empty history).
    """
    kind = model.kind
    if kind is LikelihoodKind.SIMILAR_QUESTION and not state.history:
        kind = LikelihoodKind.MOST_RELEVANT

    if kind is LikelihoodKind.ALL_RELEVANT:
        deltas = ctx.attr_values[:, attribute] - ctx.attr_values[pivot_image, attribute]
        probs = response_probability_matrix(ctx.models[attribute], deltas)
        weighted = (state.relevance()[:, None] * probs).sum(axis=0) / ctx.n_images
        return weighted / weighted.sum()

    if kind is LikelihoodKind.MOST_RELEVANT:
        best = int(np.argmax(state.log_relevance))  # first max: lowest-id tie-break
        return np.array(
            response_probabilities(
                ctx.models[attribute],
                float(ctx.attr_values[best, attribute]),
                float(ctx.attr_values[pivot_image, attribute]),
            )
        )

    if kind is LikelihoodKind.SIMILAR_QUESTION:
        if model.tau_table is None:
            raise ValueError("SIMILAR_QUESTION requires a tau_table")
        lam = model.distance_scale
        if lam is None:
            lam = default_distance_scale(ctx.features)
        x_new = ctx.features[pivot_image]
        best_score, best_response = -np.inf, None
        for past in state.history:
            dist = float(np.linalg.norm(x_new - ctx.features[past.ref_image]))
            score = float(model.tau_table[attribute, past.attribute]) - lam * dist
            if score > best_score:
                best_score, best_response = score, past.response
        out = np.zeros(3)
        out[RESPONSE_COLUMNS[best_response]] = 1.0
        return out

    raise ValueError(f"unknown likelihood kind {model.kind!r}")


def expected_entropy(
    ctx: SearchContext,
    model: LikelihoodModel,
    pivot_image: int,
    attribute: int,
    state: RelevanceState,
    stats: Optional[SelectionStats] = None,
) -> tuple[float, np.ndarray]:
    """Likelihood-weighted entropy after a hypothetical answer on a pivot.

    The three candidate updates are evaluated on copies; the input state is
    left untouched.  Returns (expected entropy, response likelihoods).
    """
    if stats is not None:
        stats.expected_entropy_evals += 1
    likelihood = response_likelihood(ctx, model, pivot_image, attribute, state)
    entropies = _question_entropies(
        ctx, np.array([pivot_image]), np.array([attribute]), state.log_relevance
    )[0]
    return float(likelihood @ entropies), likelihood


def select_question(
    ctx: SearchContext,
    pivot_set: PivotSet,
    model: LikelihoodModel,
    state: RelevanceState,
    stats: Optional[SelectionStats] = None,
) -> CandidateQuestion:
    """Pick the live cursor pivot minimizing expected entropy.

    Only the <= M cursor pivots are evaluated, never other images; ties
    break toward the lower attribute index.
    """
    live = pivot_set.live_attributes()
    if not live:
        raise ExhaustedSearchError("all attribute trees have bottomed out")
    if stats is not None:
        stats.expected_entropy_evals += len(live)
    attrs = np.asarray(live)
    pivot_images = np.array([pivot_set.cursors[m].pivot_image for m in live])
    entropies = _question_entropies(ctx, pivot_images, attrs, state.log_relevance)
    best: Optional[CandidateQuestion] = None
    for row, m in enumerate(live):
        likelihood = response_likelihood(ctx, model, int(pivot_images[row]), m, state)
        value = float(likelihood @ entropies[row])
        if best is None or value < best.expected_entropy:
            best = CandidateQuestion(
                pivot_image=int(pivot_images[row]),
                attribute=m,
                expected_entropy=value,
                response_likelihoods=likelihood,
            )
    return best


def kendall_tau(ranks_a: Sequence[float], ranks_b: Sequence[float]) -> float:
    """Tie-corrected Kendall tau-b by direct O(n^2) pair comparison."""
    a = np.asarray(ranks_a, dtype=np.float64)
    b = np.asarray(ranks_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("ranks_a and ranks_b must be equal-length vectors")
    n = a.shape[0]
    if n < 2:
        raise ValueError("need at least two items")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise ValueError("zero variance in ranks")
    sign_a = np.sign(a[:, None] - a[None, :])
    sign_b = np.sign(b[:, None] - b[None, :])
    iu = np.triu_indices(n, k=1)
    prod = sign_a[iu] * sign_b[iu]
    concordant = float((prod > 0).sum())
    discordant = float((prod < 0).sum())
    tied_a = float((sign_a[iu] == 0).sum())
    tied_b = float((sign_b[iu] == 0).sum())
    n0 = n * (n - 1) / 2.0
    denom = np.sqrt((n0 - tied_a) * (n0 - tied_b))
    return (concordant - discordant) / denom


def attribute_tau_table(
    attr_values: np.ndarray, n_validation: int = 200, seed: int = 0
) -> np.ndarray:
    """Pairwise Kendall tau between attributes on a held-out image sample."""
    n, m = attr_values.shape
    rng = np.random.default_rng(seed)
    sample = rng.choice(n, size=min(n_validation, n), replace=False)
    scores = attr_values[sample]
    table = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            table[i, j] = table[j, i] = kendall_tau(scores[:, i], scores[:, j])
    return table


def default_distance_scale(features: np.ndarray, sample: int = 200, seed: int = 0) -> float:
    """1 / median pairwise feature distance over a seeded sample."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(features.shape[0], size=min(sample, features.shape[0]), replace=False)
    sub = features[idx]
    sq = ((sub[:, None, :] - sub[None, :, :]) ** 2).sum(axis=2)
    iu = np.triu_indices(len(idx), k=1)
    med = float(np.median(np.sqrt(sq[iu])))
    return 1.0 / med if med > 0 else 1.0
