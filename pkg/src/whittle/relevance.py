"""Probabilistic relevance scoring of database images under feedback.

Every feedback statement contributes one log-probability term per image;
an image's relevance is the product of its per-statement satisfaction
probabilities, maintained as a sum of logs.  Repeated identical statements
accumulate (the product runs over all statements given, not the distinct
ones).  A hard counting variant scores each image by how many statements
it satisfies outright.

Log-relevance is materialized by summing the per-statement term rows in a
canonical order (attribute, reference, response, weight), which makes the
result bit-identical under any permutation of the feedback history.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .dataset import DatasetManifest, Relation
from .ranker import AttributeModel, response_probability_matrix
from .validation import check_image_id

PROB_CLAMP = 1e-9

RESPONSE_COLUMNS = {Relation.MORE: 0, Relation.LESS: 1, Relation.EQUAL: 2}


class RankingMode(str, Enum):
    PROBABILISTIC = "probabilistic"
    COUNTING = "counting"


@dataclass(frozen=True)
class FeedbackConstraint:
    """One user statement: target is more/less/equally attribute-m than ref."""

    ref_image: int
    attribute: int
    response: Relation
    weight: float = 1.0

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("constraint weight must be > 0")

    def sort_key(self):
        return (self.attribute, self.ref_image, self.response.value, self.weight)


@dataclass
class SearchContext:
    """Immutable per-dataset index shared read-only across sessions."""

    manifest: DatasetManifest
    features: np.ndarray          # (N, d)
    models: list[AttributeModel]
    attr_values: np.ndarray       # (N, M) predicted attribute scores
    equal_thresholds: np.ndarray  # (M,) band for hard EQUAL satisfaction
    trees: list = field(default_factory=list)
    _tau: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_images(self) -> int:
        return self.attr_values.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.attr_values.shape[1]

    def validate_constraint(self, c: FeedbackConstraint) -> None:
        check_image_id(c.ref_image, self.n_images)
        if not 0 <= c.attribute < self.n_attributes:
            raise ValueError(f"unknown attribute index {c.attribute}")


def constraint_log_probs(ctx: SearchContext, c: FeedbackConstraint) -> np.ndarray:
    """Weighted log-probability that each image satisfies one statement.

    The matching normalized response probability is clamped to
    [PROB_CLAMP, 1 - PROB_CLAMP] before the log so no image's relevance
    ever collapses to exactly zero.
    """
    ctx.validate_constraint(c)
    m = c.attribute
    deltas = ctx.attr_values[:, m] - ctx.attr_values[c.ref_image, m]
    probs = response_probability_matrix(ctx.models[m], deltas)
    p = probs[:, RESPONSE_COLUMNS[c.response]]
    return c.weight * np.log(np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP))


def constraint_log_prob(ctx: SearchContext, image_id: int, c: FeedbackConstraint) -> float:
    """Scalar variant of :func:`constraint_log_probs` for one image."""
    check_image_id(image_id, ctx.n_images)
    return float(constraint_log_probs(ctx, c)[image_id])


def satisfies_hard(ctx: SearchContext, c: FeedbackConstraint) -> np.ndarray:
    """Boolean per-image satisfaction under the hard (counting) reading."""
    ctx.validate_constraint(c)
    m = c.attribute
    values = ctx.attr_values[:, m]
    ref = ctx.attr_values[c.ref_image, m]
    if c.response is Relation.MORE:
        return values > ref
    if c.response is Relation.LESS:
        return values < ref
    return np.abs(values - ref) <= ctx.equal_thresholds[m]


class RelevanceState:
    """Accumulated feedback plus derived per-image relevance arrays.

    Updates are non-destructive: :func:`update_relevance` returns a new
    state sharing the existing term rows, so hypothetical updates never
    mutate the live session.
    """

    def __init__(
        self,
        n_images: int,
        history: tuple[FeedbackConstraint, ...] = (),
        term_rows: tuple[np.ndarray, ...] = (),
        satisfied_counts: Optional[np.ndarray] = None,
    ):
        self.n_images = n_images
        self.history = history
        self.term_rows = term_rows
        if satisfied_counts is None:
            satisfied_counts = np.zeros(n_images, dtype=np.int64)
        self.satisfied_counts = satisfied_counts
        self._log_relevance: Optional[np.ndarray] = None

    @property
    def log_relevance(self) -> np.ndarray:
        """Canonical-order sum of term rows; <= 0 everywhere."""
        if self._log_relevance is None:
            if not self.term_rows:
                self._log_relevance = np.zeros(self.n_images)
            else:
                order = sorted(
                    range(len(self.history)), key=lambda k: self.history[k].sort_key()
                )
                stacked = np.stack([self.term_rows[k] for k in order])
                self._log_relevance = np.add.reduce(stacked, axis=0)
        return self._log_relevance

    def relevance(self) -> np.ndarray:
        """P(y_i = 1 | feedback) for every image; in (0, 1]."""
        return np.exp(self.log_relevance)


def update_relevance(
    ctx: SearchContext, state: RelevanceState, c: FeedbackConstraint
) -> RelevanceState:
    """Fold one statement into the state; returns a new state."""
    row = constraint_log_probs(ctx, c)
    counts = state.satisfied_counts + satisfies_hard(ctx, c)
    return RelevanceState(
        n_images=state.n_images,
        history=state.history + (c,),
        term_rows=state.term_rows + (row,),
        satisfied_counts=counts,
    )


def rebuild_state(
    ctx: SearchContext, history: Sequence[FeedbackConstraint]
) -> RelevanceState:
    """Reconstruct a state from scratch over a constraint history."""
    state = RelevanceState(ctx.n_images)
    for c in history:
        state = update_relevance(ctx, state, c)
    return state


def rank_images(state: RelevanceState, mode: RankingMode = RankingMode.PROBABILISTIC) -> np.ndarray:
    """Permutation of image ids, best first; ties broken by ascending id."""
    if mode is RankingMode.PROBABILISTIC:
        scores = state.log_relevance
    elif mode is RankingMode.COUNTING:
        scores = state.satisfied_counts
    else:
        raise ValueError(f"unknown ranking mode {mode!r}")
    return rank_by_score(scores)


def rank_by_score(scores: np.ndarray) -> np.ndarray:
    """Descending stable sort of scores; equal scores order by image id."""
    return np.argsort(-np.asarray(scores), kind="stable")


def percentile_rank(ranking: np.ndarray, target_id: int) -> float:
    """Fraction of database images ranked below the target; 1.0 when first."""
    positions = np.flatnonzero(ranking == target_id)
    if positions.size == 0:
        raise ValueError(f"target {target_id} not present in ranking")
    n = len(ranking)
    if n == 1:
        return 1.0
    return float(n - 1 - positions[0]) / float(n - 1)
