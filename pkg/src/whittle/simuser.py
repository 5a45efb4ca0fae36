"""Simulated users that answer comparison questions for experiments.

Responses come from the predicted attribute scores of the target and
reference images, perturbed by seeded Gaussian noise; a per-attribute
equality band (derived from training pairs labeled as equally strong)
decides when the answer is "equally" rather than more/less.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import DatasetManifest, Relation
from .relevance import FeedbackConstraint, SearchContext


@dataclass
class SimUserConfig:
    noise_sd: np.ndarray | float = 0.0        # scalar or per-attribute
    equal_thresholds: Optional[np.ndarray] = None  # defaults to context's
    binary_similar_band: float = 1.0
    seed: int = 0

    def noise_for(self, attribute: int) -> float:
        if np.isscalar(self.noise_sd):
            value = float(self.noise_sd)
        else:
            value = float(np.asarray(self.noise_sd)[attribute])
        if value < 0:
            raise ValueError("noise_sd must be >= 0")
        return value


def equal_threshold_from_training(equal_diffs: Sequence[float]) -> float:
    """75th nearest-rank percentile of |score difference| on EQUAL pairs."""
    diffs = np.abs(np.asarray(list(equal_diffs), dtype=np.float64))
    if diffs.size == 0:
        raise ValueError("no EQUAL training pairs; use fallback_equal_threshold")
    rank = int(np.ceil(0.75 * diffs.size))  # nearest-rank definition, 1-based
    return float(np.sort(diffs)[rank - 1])


def fallback_equal_threshold(attr_values_column: np.ndarray) -> float:
    """Documented fallback when an attribute has no EQUAL training pairs."""
    return 0.1 * float(np.std(attr_values_column))


def equal_thresholds_for(manifest: DatasetManifest, attr_values: np.ndarray) -> np.ndarray:
    """Per-attribute equality bands, shared by scoring and simulation."""
    out = np.empty(attr_values.shape[1])
    for m in range(attr_values.shape[1]):
        pairs = manifest.equal_pairs(m)
        if len(pairs):
            diffs = attr_values[pairs[:, 0], m] - attr_values[pairs[:, 1], m]
            out[m] = equal_threshold_from_training(diffs)
        else:
            out[m] = fallback_equal_threshold(attr_values[:, m])
    return out


class SimulatedUser:
    """Seeded response generator; one instance per episode/session."""

    def __init__(self, ctx: SearchContext, config: SimUserConfig):
        self.ctx = ctx
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.used_pairs: set[tuple[int, int]] = set()
        self._thresholds = (
            config.equal_thresholds
            if config.equal_thresholds is not None
            else ctx.equal_thresholds
        )

    def relative_response(
        self, target_id: int, pivot_id: int, attribute: int
    ) -> tuple[Relation, int]:
        """Answer "is the target more/less/equally m than the pivot".

        Both scores get independent Gaussian noise; confidence is 3 when
        the noisy gap clears twice the equality band, else 2.
        """
        sd = self.config.noise_for(attribute)
        a = self.ctx.attr_values[target_id, attribute] + self.rng.normal(0.0, sd)
        b = self.ctx.attr_values[pivot_id, attribute] + self.rng.normal(0.0, sd)
        delta = a - b
        threshold = float(self._thresholds[attribute])
        if abs(delta) <= threshold:
            return Relation.EQUAL, 2
        response = Relation.MORE if delta > 0 else Relation.LESS
        confidence = 3 if abs(delta) > 2 * threshold else 2
        return response, confidence

    def binary_response(
        self, target_id: int, exemplar_id: int, gt_distances: np.ndarray
    ) -> bool:
        """True (similar) when the exemplar sits well inside the target's
        distance distribution: d <= mean - band * sd, floored at 0 so the
        target itself is always similar."""
        d = float(gt_distances[exemplar_id])
        mu = float(gt_distances.mean())
        sd = float(gt_distances.std())
        threshold = max(mu - self.config.binary_similar_band * sd, 0.0)
        return d <= threshold

    def free_choice_feedback(
        self,
        target_id: int,
        shown: Sequence[int],
        n_statements: int,
    ) -> list[FeedbackConstraint]:
        """Pick the highest-confidence statements over shown references.

        All not-yet-used (reference, attribute) pairs are candidates; the
        n_statements most confident responses win, ties resolved by a
        seeded draw, and chosen pairs are never reused in this session.
        """
        if not shown:
            raise ValueError("shown reference set is empty")
        candidates = [
            (ref, m)
            for ref in shown
            for m in range(self.ctx.n_attributes)
            if (int(ref), m) not in self.used_pairs
        ]
        scored = []
        for ref, m in candidates:
            response, confidence = self.relative_response(target_id, int(ref), m)
            scored.append((confidence, self.rng.random(), int(ref), m, response))
        scored.sort(key=lambda row: (-row[0], row[1]))
        kept = scored[:n_statements]
        out = []
        for confidence, _, ref, m, response in kept:
            self.used_pairs.add((ref, m))
            out.append(
                FeedbackConstraint(
                    ref_image=ref,
                    attribute=m,
                    response=response,
                    weight=2.0 if confidence == 3 else 1.0,
                )
            )
        return out
