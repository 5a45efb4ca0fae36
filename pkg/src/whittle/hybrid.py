"""Joint training on binary relevant/irrelevant sets and relative feedback.

Relative statements partition the database into buckets by how many
statements each image hard-satisfies; a per-session scoring function is
then trained on ordered pairs that prefer relevant over irrelevant images
and higher buckets over the adjacent lower bucket.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ranker import PairwiseRankSVM, TrainConfig
from .relevance import FeedbackConstraint, SearchContext, satisfies_hard


@dataclass
class BinaryFeedback:
    relevant: set[int] = field(default_factory=set)
    irrelevant: set[int] = field(default_factory=set)

    def __post_init__(self):
        overlap = self.relevant & self.irrelevant
        if overlap:
            raise ValueError(f"images marked both relevant and irrelevant: {sorted(overlap)}")


@dataclass
class SatisfactionPartition:
    """Buckets C_0..C_F of image ids by hard-satisfied statement count."""

    buckets: list[np.ndarray]

    @property
    def n_statements(self) -> int:
        return len(self.buckets) - 1


def satisfaction_partition(
    ctx: SearchContext, constraints: Sequence[FeedbackConstraint]
) -> SatisfactionPartition:
    counts = np.zeros(ctx.n_images, dtype=np.int64)
    for c in constraints:
        counts += satisfies_hard(ctx, c)
    buckets = [np.flatnonzero(counts == k) for k in range(len(constraints) + 1)]
    return SatisfactionPartition(buckets=buckets)


def build_ordered_pairs(
    binary: BinaryFeedback,
    partition: SatisfactionPartition,
    cap: int = 20000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Ordered (winner, loser) pairs plus per-pair weights.

    Emits relevant x irrelevant pairs and, for each adjacent bucket pair,
    C_k x C_{k-1} (higher-satisfaction images outrank the next bucket down;
    non-adjacent buckets are never paired directly).  Binary pairs carry
    weight n_attribute_pairs / n_binary_pairs so the handful of explicit
    relevance labels is not drowned out; with no attribute pairs the weight
    is 1.  When the union of blocks exceeds ``cap`` total pairs, each block
    is subsampled proportionally with the given seed.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    blocks: list[tuple[np.ndarray, np.ndarray, bool]] = []
    rel = np.fromiter(sorted(binary.relevant), dtype=np.int64)
    irr = np.fromiter(sorted(binary.irrelevant), dtype=np.int64)
    if rel.size and irr.size:
        blocks.append((rel, irr, True))
    for k in range(len(partition.buckets) - 1, 0, -1):
        hi, lo = partition.buckets[k], partition.buckets[k - 1]
        if hi.size and lo.size:
            blocks.append((hi, lo, False))
    if not blocks:
        raise ValueError("no feedback of either kind: ordered pair set is empty")

    sizes = [h.size * l.size for h, l, _ in blocks]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    n_binary = sum(s for s, (_, _, is_bin) in zip(sizes, blocks) if is_bin)
    n_attr = total - n_binary
    binary_weight = (n_attr / n_binary) if (n_binary and n_attr) else 1.0

    pairs: list[np.ndarray] = []
    weights: list[np.ndarray] = []
    for (hi, lo, is_bin), size in zip(blocks, sizes):
        grid = np.stack(
            [np.repeat(hi, lo.size), np.tile(lo, hi.size)], axis=1
        )
        if total > cap:
            keep = max(1, int(round(cap * size / total)))
            if keep < size:
                grid = grid[rng.choice(size, size=keep, replace=False)]
        pairs.append(grid)
        weights.append(np.full(len(grid), binary_weight if is_bin else 1.0))
    return np.concatenate(pairs), np.concatenate(weights)


def train_hybrid_scorer(
    pairs: np.ndarray,
    weights: np.ndarray,
    features: np.ndarray,
    config: TrainConfig | None = None,
) -> np.ndarray:
    """Fit the per-session relevance weights w_s on the ordered pair set."""
    config = config or TrainConfig()
    est = PairwiseRankSVM(
        C=config.C,
        epochs=config.epochs,
        step_size=config.step_size,
        tolerance=config.tolerance,
        seed=config.seed,
    ).fit(features, pairs, sample_weight=weights)
    return est.coef_
