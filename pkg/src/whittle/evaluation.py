"""Metrics, ground-truth rankings, baseline policies and the experiment harness.

Every query fixes a target image; a policy chooses what to ask or show, a
simulated user answers, relevance updates, and percentile rank / NDCG@K of
the target-centered ground truth are recorded per iteration.  Policies
consume identical seeded target lists and shared initial constraints so
their curves are directly comparable.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .active import (
    ExhaustedSearchError,
    LikelihoodKind,
    LikelihoodModel,
    SelectionStats,
    attribute_tau_table,
    entropy,
    expected_entropy,
    select_question,
)
from .dataset import Relation
from .pivots import PivotSet, descend
from .ranker import HingeClassifier
from .relevance import (
    FeedbackConstraint,
    RankingMode,
    RelevanceState,
    SearchContext,
    percentile_rank,
    rank_by_score,
    rank_images,
)
from .simuser import SimUserConfig, SimulatedUser


@dataclass
class GroundTruth:
    target_id: int
    distances: np.ndarray        # (N,) distance of every image to the target
    ranking: np.ndarray          # permutation, best (closest) first
    graded_relevance: np.ndarray  # (N,) in [0, 1], decreasing with gt rank


def ground_truth_for(
    ctx: SearchContext,
    target_id: int,
    feature_weight: float = 0.5,
    attribute_weight: float = 0.5,
) -> GroundTruth:
    """Target-centered ground truth from a weighted two-block distance.

    Each block (raw features, predicted attribute scores) is divided by a
    scalar scale (RMS deviation of its entries) so the blocks are
    commensurate; a zero weight on one block reduces the ranking exactly to
    the other block's plain Euclidean ordering.
    """
    blocks, weights = [], []
    for block, weight in ((ctx.features, feature_weight), (ctx.attr_values, attribute_weight)):
        if weight == 0:
            continue
        scale = float(np.sqrt(np.mean((block - block.mean(axis=0)) ** 2)))
        blocks.append(block / (scale if scale > 0 else 1.0))
        weights.append(weight)
    if not blocks:
        raise ValueError("at least one block weight must be nonzero")
    sq = np.zeros(ctx.n_images)
    for block, weight in zip(blocks, weights):
        diff = block - block[target_id]
        sq += weight * (diff * diff).sum(axis=1)
    distances = np.sqrt(sq)
    ranking = np.lexsort((np.arange(ctx.n_images), distances))
    n = ctx.n_images
    graded = np.empty(n)
    graded[ranking] = (n - np.arange(1, n + 1)) / n
    return GroundTruth(
        target_id=target_id, distances=distances, ranking=ranking, graded_relevance=graded
    )


def ndcg_at_k(predicted_ranking: np.ndarray, graded_relevance: np.ndarray, k: int) -> float:
    """Normalized discounted cumulative gain over the top k positions."""
    n = len(graded_relevance)
    if not 1 <= k <= n:
        raise ValueError(f"K must be in 1..{n}")
    discounts = 1.0 / np.log2(np.arange(2, k + 2))
    gains = np.power(2.0, graded_relevance) - 1.0
    dcg = float(gains[np.asarray(predicted_ranking)[:k]] @ discounts)
    ideal = float(np.sort(gains)[::-1][:k] @ discounts)
    if ideal == 0.0:
        raise ValueError("ideal DCG is zero: all relevance grades are zero")
    return dcg / ideal


class Policy(str, Enum):
    ACTIVE_PIVOTS = "active_pivots"
    PIVOTS_ROUND_ROBIN = "pivots_round_robin"
    ACTIVE_EXHAUSTIVE = "active_exhaustive"
    TOP = "top"
    PASSIVE = "passive"
    BINARY_ACTIVE = "binary_active"
    BINARY_PASSIVE = "binary_passive"
    WHITTLE_FREE = "whittle_free"


TREE_POLICIES = {Policy.ACTIVE_PIVOTS, Policy.PIVOTS_ROUND_ROBIN}
QUESTION_POLICIES = TREE_POLICIES | {Policy.ACTIVE_EXHAUSTIVE, Policy.TOP, Policy.PASSIVE}
BINARY_POLICIES = {Policy.BINARY_ACTIVE, Policy.BINARY_PASSIVE}

EXHAUSTIVE_MAX_N = 2000  # full MxN scan is quadratic; refuse beyond desk scale


@dataclass
class ExperimentConfig:
    policies: list[Policy]
    iterations: int = 10
    queries: int = 200
    seed: int = 0
    k_page: int = 40
    k_ndcg: int = 50
    noise_sd: np.ndarray | float = 0.0
    n_statements: int = 8
    likelihood: LikelihoodKind = LikelihoodKind.MOST_RELEVANT
    use_abs_decision: bool = False
    feature_weight: float = 0.5
    attribute_weight: float = 0.5

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.queries < 1:
            raise ValueError("queries must be >= 1")


@dataclass
class IterationRecord:
    iteration: int
    percentile_rank: float
    ndcg: float
    entropy: Optional[float]
    selection_seconds: float
    n_constraints: int
    exhausted: bool = False


def _likelihood_model(ctx: SearchContext, config: ExperimentConfig) -> LikelihoodModel:
    tau = None
    if config.likelihood is LikelihoodKind.SIMILAR_QUESTION:
        if ctx._tau is None:
            ctx._tau = attribute_tau_table(ctx.attr_values, seed=config.seed)
        tau = ctx._tau
    return LikelihoodModel(kind=config.likelihood, tau_table=tau)


def _shared_init_constraint(
    ctx: SearchContext, user: SimulatedUser, target_id: int, rng: np.random.Generator
) -> FeedbackConstraint:
    ref = int(rng.integers(ctx.n_images))
    if ref == target_id:
        ref = (ref + 1) % ctx.n_images
    attribute = int(rng.integers(ctx.n_attributes))
    response, confidence = user.relative_response(target_id, ref, attribute)
    return FeedbackConstraint(
        ref_image=ref, attribute=attribute, response=response,
        weight=2.0 if confidence == 3 else 1.0,
    )


def run_episode(
    ctx: SearchContext,
    policy: Policy,
    target_id: int,
    iterations: int,
    config: ExperimentConfig,
    episode_seed: int,
) -> list[IterationRecord]:
    """One query under one policy; returns a record per iteration (plus the
    initialized state at iteration 0)."""
    if policy in BINARY_POLICIES:
        return _run_binary_episode(ctx, policy, target_id, iterations, config, episode_seed)
    if policy is Policy.WHITTLE_FREE:
        return _run_free_episode(ctx, target_id, iterations, config, episode_seed)
    return _run_question_episode(ctx, policy, target_id, iterations, config, episode_seed)


def _metrics(
    ctx: SearchContext,
    gt: GroundTruth,
    state: RelevanceState,
    mode: RankingMode,
    config: ExperimentConfig,
) -> tuple[float, float, float]:
    ranking = rank_images(state, mode)
    return (
        percentile_rank(ranking, gt.target_id),
        ndcg_at_k(ranking, gt.graded_relevance, config.k_ndcg),
        entropy(state),
    )


def _run_question_episode(ctx, policy, target_id, iterations, config, episode_seed):
    from .relevance import update_relevance

    rng = np.random.default_rng(episode_seed)
    user = SimulatedUser(
        ctx, SimUserConfig(noise_sd=config.noise_sd, seed=int(rng.integers(2**31)))
    )
    gt = ground_truth_for(ctx, target_id, config.feature_weight, config.attribute_weight)
    likelihood_model = _likelihood_model(ctx, config)

    state = RelevanceState(ctx.n_images)
    init = _shared_init_constraint(ctx, user, target_id, rng)
    state = update_relevance(ctx, state, init)
    pivot_set = PivotSet.at_roots(ctx.trees)
    asked: set[tuple[int, int]] = {(init.ref_image, init.attribute)}

    records = []
    pr, ndcg, ent = _metrics(ctx, gt, state, RankingMode.PROBABILISTIC, config)
    records.append(IterationRecord(0, pr, ndcg, ent, 0.0, len(state.history)))

    for it in range(1, iterations + 1):
        t0 = time.perf_counter()
        try:
            pivot_image, attribute = _propose_question(
                ctx, policy, state, pivot_set, asked, likelihood_model, rng, config
            )
        except ExhaustedSearchError:
            records.append(
                IterationRecord(it, pr, ndcg, ent, 0.0, len(state.history), exhausted=True)
            )
            break
        selection_seconds = time.perf_counter() - t0

        response, confidence = user.relative_response(target_id, pivot_image, attribute)
        constraint = FeedbackConstraint(
            ref_image=pivot_image, attribute=attribute, response=response,
            weight=2.0 if confidence == 3 else 1.0,
        )
        state = update_relevance(ctx, state, constraint)
        asked.add((pivot_image, attribute))
        if policy in TREE_POLICIES:
            pivot_set = descend(pivot_set, attribute, response)

        pr, ndcg, ent = _metrics(ctx, gt, state, RankingMode.PROBABILISTIC, config)
        records.append(
            IterationRecord(it, pr, ndcg, ent, selection_seconds, len(state.history))
        )
    return records


def _propose_question(ctx, policy, state, pivot_set, asked, likelihood_model, rng, config):
    if policy is Policy.ACTIVE_PIVOTS:
        q = select_question(ctx, pivot_set, likelihood_model, state)
        return q.pivot_image, q.attribute

    if policy is Policy.PIVOTS_ROUND_ROBIN:
        live = pivot_set.live_attributes()
        if not live:
            raise ExhaustedSearchError("all attribute trees have bottomed out")
        asked_count = len(state.history)
        attribute = live[asked_count % len(live)]
        return pivot_set.cursors[attribute].pivot_image, attribute

    if policy is Policy.ACTIVE_EXHAUSTIVE:
        if ctx.n_images > EXHAUSTIVE_MAX_N:
            raise ValueError(
                f"exhaustive scan refused for N={ctx.n_images} > {EXHAUSTIVE_MAX_N}"
            )
        best = None
        model = likelihood_model
        for m in range(ctx.n_attributes):
            for i in range(ctx.n_images):
                if (i, m) in asked:
                    continue
                value, _ = expected_entropy(ctx, model, i, m, state)
                if best is None or value < best[0]:
                    best = (value, i, m)
        if best is None:
            raise ExhaustedSearchError("every candidate question already asked")
        return best[1], best[2]

    if policy is Policy.TOP:
        ranking = rank_images(state, RankingMode.PROBABILISTIC)
        for image in ranking:
            free = [m for m in range(ctx.n_attributes) if (int(image), m) not in asked]
            if free:
                return int(image), int(rng.choice(free))
        raise ExhaustedSearchError("every candidate question already asked")

    if policy is Policy.PASSIVE:
        for _ in range(10000):
            image = int(rng.integers(ctx.n_images))
            attribute = int(rng.integers(ctx.n_attributes))
            if (image, attribute) not in asked:
                return image, attribute
        raise ExhaustedSearchError("every candidate question already asked")

    raise ValueError(f"unsupported question policy {policy!r}")


def _run_free_episode(ctx, target_id, iterations, config, episode_seed):
    from .relevance import update_relevance

    rng = np.random.default_rng(episode_seed)
    user = SimulatedUser(
        ctx, SimUserConfig(noise_sd=config.noise_sd, seed=int(rng.integers(2**31)))
    )
    gt = ground_truth_for(ctx, target_id, config.feature_weight, config.attribute_weight)

    state = RelevanceState(ctx.n_images)
    init = _shared_init_constraint(ctx, user, target_id, rng)
    state = update_relevance(ctx, state, init)
    user.used_pairs.add((init.ref_image, init.attribute))

    shown = [int(v) for v in rng.choice(ctx.n_images, size=config.k_page, replace=False)]
    records = []
    pr, ndcg, ent = _metrics(ctx, gt, state, RankingMode.COUNTING, config)
    records.append(IterationRecord(0, pr, ndcg, ent, 0.0, len(state.history)))

    for it in range(1, iterations + 1):
        t0 = time.perf_counter()
        constraints = user.free_choice_feedback(target_id, shown, config.n_statements)
        selection_seconds = time.perf_counter() - t0
        if not constraints:
            records.append(
                IterationRecord(it, pr, ndcg, ent, 0.0, len(state.history), exhausted=True)
            )
            break
        for c in constraints:
            state = update_relevance(ctx, state, c)
        ranking = rank_images(state, RankingMode.COUNTING)
        shown = [int(v) for v in ranking[: config.k_page]]
        pr = percentile_rank(ranking, target_id)
        ndcg = ndcg_at_k(ranking, gt.graded_relevance, config.k_ndcg)
        ent = entropy(state)
        records.append(
            IterationRecord(it, pr, ndcg, ent, selection_seconds, len(state.history))
        )
    return records


def _run_binary_episode(ctx, policy, target_id, iterations, config, episode_seed):
    rng = np.random.default_rng(episode_seed)
    user = SimulatedUser(
        ctx, SimUserConfig(noise_sd=config.noise_sd, seed=int(rng.integers(2**31)))
    )
    gt = ground_truth_for(ctx, target_id, config.feature_weight, config.attribute_weight)

    # generous initialization: peek at a pool of 40 and take the closest
    # image as a positive, the furthest as a negative
    pool = rng.choice(ctx.n_images, size=min(40, ctx.n_images), replace=False)
    pos = int(pool[np.argmin(gt.distances[pool])])
    neg = int(pool[np.argmax(gt.distances[pool])])
    labeled: dict[int, int] = {pos: 1, neg: -1}

    def retrain():
        ids = np.fromiter(labeled.keys(), dtype=np.int64)
        y = np.fromiter((labeled[i] for i in ids), dtype=np.float64)
        if len(set(labeled.values())) < 2:
            return np.zeros(ctx.n_images)
        clf = HingeClassifier(C=1.0, seed=episode_seed).fit(ctx.features[ids], y)
        decision = clf.decision_function(ctx.features)
        return np.abs(decision) if config.use_abs_decision else decision

    scores = retrain()
    ranking = rank_by_score(scores)
    records = [
        IterationRecord(
            0,
            percentile_rank(ranking, target_id),
            ndcg_at_k(ranking, gt.graded_relevance, config.k_ndcg),
            None,
            0.0,
            len(labeled),
        )
    ]
    for it in range(1, iterations + 1):
        unlabeled = np.setdiff1d(np.arange(ctx.n_images), np.fromiter(labeled, np.int64))
        if unlabeled.size == 0:
            records.append(
                IterationRecord(
                    it, records[-1].percentile_rank, records[-1].ndcg, None, 0.0,
                    len(labeled), exhausted=True,
                )
            )
            break
        t0 = time.perf_counter()
        take = min(config.n_statements, unlabeled.size)
        if policy is Policy.BINARY_ACTIVE:
            order = unlabeled[np.argsort(np.abs(scores[unlabeled]), kind="stable")]
            chosen = order[:take]
        else:
            chosen = rng.choice(unlabeled, size=take, replace=False)
        selection_seconds = time.perf_counter() - t0
        for exemplar in chosen:
            similar = user.binary_response(target_id, int(exemplar), gt.distances)
            labeled[int(exemplar)] = 1 if similar else -1
        scores = retrain()
        ranking = rank_by_score(scores)
        records.append(
            IterationRecord(
                it,
                percentile_rank(ranking, target_id),
                ndcg_at_k(ranking, gt.graded_relevance, config.k_ndcg),
                None,
                selection_seconds,
                len(labeled),
            )
        )
    return records


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    targets: list[int]
    # (policy, query index) -> per-iteration records
    episodes: dict[tuple[str, int], list[IterationRecord]] = field(default_factory=dict)

    def table_rows(self) -> list[dict]:
        rows = []
        for policy in self.config.policies:
            per_iteration: dict[int, list[IterationRecord]] = {}
            for q in range(len(self.targets)):
                rec_list = self.episodes[(policy.value, q)]
                padded = _pad_records(rec_list, self.config.iterations)
                for rec in padded:
                    per_iteration.setdefault(rec.iteration, []).append(rec)
            for it in sorted(per_iteration):
                recs = per_iteration[it]
                ranks = [r.percentile_rank for r in recs]
                rows.append(
                    {
                        "policy": policy.value,
                        "iteration": it,
                        "mean_percentile_rank": float(np.mean(ranks)),
                        "median_percentile_rank": float(np.median(ranks)),
                        "mean_ndcg": float(np.mean([r.ndcg for r in recs])),
                        "mean_selection_seconds": float(
                            np.mean([r.selection_seconds for r in recs])
                        ),
                        "episodes": len(recs),
                        "exhausted": sum(r.exhausted for r in recs),
                    }
                )
        return rows

    def final_ranks(self, policy: Policy, iteration: Optional[int] = None) -> np.ndarray:
        """Per-query percentile rank at a given iteration (default: last)."""
        it = self.config.iterations if iteration is None else iteration
        out = []
        for q in range(len(self.targets)):
            padded = _pad_records(self.episodes[(policy.value, q)], self.config.iterations)
            out.append(padded[it].percentile_rank)
        return np.asarray(out)


def _pad_records(records: list[IterationRecord], iterations: int) -> list[IterationRecord]:
    """Carry the last record forward when an episode ended early."""
    padded = list(records)
    while len(padded) < iterations + 1:
        last = padded[-1]
        padded.append(
            IterationRecord(
                last.iteration + 1, last.percentile_rank, last.ndcg, last.entropy,
                0.0, last.n_constraints, exhausted=True,
            )
        )
    return padded


def run_experiment(ctx: SearchContext, config: ExperimentConfig) -> ExperimentResult:
    """Run every policy over a shared seeded target list."""
    rng = np.random.default_rng(config.seed)
    targets = [int(t) for t in rng.choice(ctx.n_images, size=config.queries, replace=config.queries > ctx.n_images)]
    episode_seeds = [int(s) for s in rng.integers(2**31, size=config.queries)]
    result = ExperimentResult(config=config, targets=targets)
    for policy in config.policies:
        for q, (target, seed) in enumerate(zip(targets, episode_seeds)):
            result.episodes[(policy.value, q)] = run_episode(
                ctx, policy, target, config.iterations, config, seed
            )
    return result


def write_results(result: ExperimentResult, out_dir) -> tuple[Path, Path]:
    """Emit the aggregate CSV table and the per-curve plot-data JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = result.table_rows()
    csv_path = out / "results.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    curves: dict[str, dict] = {}
    for row in rows:
        curve = curves.setdefault(
            row["policy"],
            {"iterations": [], "mean_percentile_rank": [], "mean_ndcg": [],
             "mean_selection_seconds": []},
        )
        curve["iterations"].append(row["iteration"])
        curve["mean_percentile_rank"].append(row["mean_percentile_rank"])
        curve["mean_ndcg"].append(row["mean_ndcg"])
        curve["mean_selection_seconds"].append(row["mean_selection_seconds"])
    plot_path = out / "plot_data.json"
    with open(plot_path, "w", encoding="utf-8") as fh:
        json.dump(curves, fh, indent=2)
    return csv_path, plot_path


def sign_test_pvalue(x: np.ndarray, y: np.ndarray) -> float:
    """One-sided paired sign test that x tends to exceed y (ties dropped)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    wins = int((x > y).sum())
    losses = int((x < y).sum())
    n = wins + losses
    if n == 0:
        return 1.0
    return sum(math.comb(n, k) for k in range(wins, n + 1)) / 2.0**n
