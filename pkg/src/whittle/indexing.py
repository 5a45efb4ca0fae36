"""Offline pipeline: train attribute models, build the search index.

Training and tree construction happen once per dataset, before any
session; the resulting SearchContext (features, models, predicted scores,
equality bands, pivot trees) is immutable and shared by every session.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from . import pivots
from .dataset import DatasetManifest
from .ranker import AttributeModel, TrainConfig, calibrate_attribute_model, train_attribute_ranker
from .relevance import SearchContext
from .simuser import equal_thresholds_for


def train_models(
    manifest: DatasetManifest, config: TrainConfig | None = None
) -> list[AttributeModel]:
    """Train and calibrate one AttributeModel per attribute."""
    config = config or TrainConfig()
    features = manifest.features_matrix()
    models = []
    for m in range(manifest.n_attributes):
        ordered = manifest.ordered_pairs(m)
        if len(ordered) == 0:
            raise ValueError(f"attribute {m} has no ordered training pairs")
        weights, violation_rate = train_attribute_ranker(ordered, features, config)
        model = AttributeModel(attribute=m, weights=weights, train_violation_rate=violation_rate)
        scores = features @ weights
        calibrate_attribute_model(model, scores, ordered, manifest.equal_pairs(m))
        models.append(model)
    return models


def save_models(models: list[AttributeModel], attribute_names: list[str], path) -> None:
    doc = {
        "attribute_names": list(attribute_names),
        "d": int(models[0].weights.shape[0]),
        "models": [
            {
                "attribute": m.attribute,
                "weights": [float(v) for v in m.weights],
                "alpha": m.alpha,
                "beta": m.beta,
                "gamma": m.gamma,
                "delta": m.delta,
                "train_violation_rate": m.train_violation_rate,
            }
            for m in models
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_models(path) -> tuple[list[AttributeModel], list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    models = [
        AttributeModel(
            attribute=int(raw["attribute"]),
            weights=np.asarray(raw["weights"], dtype=np.float64),
            alpha=float(raw["alpha"]),
            beta=float(raw["beta"]),
            gamma=float(raw["gamma"]),
            delta=float(raw["delta"]),
            train_violation_rate=float(raw.get("train_violation_rate", 0.0)),
        )
        for raw in doc["models"]
    ]
    return models, list(doc["attribute_names"])


def build_context(
    manifest: DatasetManifest,
    models: list[AttributeModel],
    trees: Optional[list[pivots.TreeNode]] = None,
) -> SearchContext:
    """Assemble the immutable per-dataset index."""
    features = manifest.features_matrix()
    attr_values = np.stack([features @ m.weights for m in models], axis=1)
    thresholds = equal_thresholds_for(manifest, attr_values)
    if trees is None:
        trees = [pivots.build_tree(attr_values[:, m]) for m in range(len(models))]
    return SearchContext(
        manifest=manifest,
        features=features,
        models=models,
        attr_values=attr_values,
        equal_thresholds=thresholds,
        trees=trees,
    )


def build_index(manifest: DatasetManifest, config: TrainConfig | None = None) -> SearchContext:
    """One-call train + calibrate + tree construction for a dataset."""
    return build_context(manifest, train_models(manifest, config))


def save_index(ctx: SearchContext, path) -> None:
    pivots.save_trees(ctx.trees, ctx.manifest.attribute_names, path)


def load_context(manifest: DatasetManifest, models_path, trees_path=None) -> SearchContext:
    models, names = load_models(models_path)
    if names != list(manifest.attribute_names):
        raise ValueError("model file attribute names do not match the dataset")
    trees = None
    if trees_path is not None:
        trees = pivots.load_trees(trees_path, manifest.attribute_names)
    return build_context(manifest, models, trees)
