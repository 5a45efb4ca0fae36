"""Dataset ingestion, validation and synthetic benchmark generation.

A dataset is a single JSON document holding precomputed feature vectors,
pairwise attribute comparison labels, and (optionally) a class-order table
that ranks each class per attribute.  Synthetic datasets are generated from
such a table: every image draws a latent per-attribute strength from its
class rank plus jitter, features embed those latents linearly, and
comparison labels are sampled from the latents with controllable noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np


class Relation(str, Enum):
    MORE = "more"
    LESS = "less"
    EQUAL = "equal"


class ManifestError(ValueError):
    """A dataset file failed validation; message carries a field diagnostic."""


@dataclass
class ImageRecord:
    id: int
    features: np.ndarray
    class_id: Optional[int] = None
    asset_path: Optional[str] = None


@dataclass
class ComparisonLabel:
    attribute: int
    first: int
    second: int
    relation: Relation
    confidence: int = 2


@dataclass
class DatasetManifest:
    name: str
    attribute_names: list[str]
    images: list[ImageRecord]
    comparisons: list[ComparisonLabel]
    class_orders: Optional[np.ndarray] = None
    # Debug side-channel: latent per-attribute strengths of synthetic images.
    # Never serialized; None for loaded real datasets.
    latents: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def n_images(self) -> int:
        return len(self.images)

    @property
    def dim(self) -> int:
        return int(self.images[0].features.shape[0]) if self.images else 0

    @property
    def n_attributes(self) -> int:
        return len(self.attribute_names)

    def features_matrix(self) -> np.ndarray:
        return np.stack([rec.features for rec in self.images])

    def ordered_pairs(self, attribute: int) -> np.ndarray:
        """(winner, loser) id pairs for one attribute, from MORE/LESS labels."""
        out = []
        for c in self.comparisons:
            if c.attribute != attribute:
                continue
            if c.relation is Relation.MORE:
                out.append((c.first, c.second))
            elif c.relation is Relation.LESS:
                out.append((c.second, c.first))
        return np.asarray(out, dtype=np.int64).reshape(-1, 2)

    def equal_pairs(self, attribute: int) -> np.ndarray:
        out = [
            (c.first, c.second)
            for c in self.comparisons
            if c.attribute == attribute and c.relation is Relation.EQUAL
        ]
        return np.asarray(out, dtype=np.int64).reshape(-1, 2)


# Class-order table for the ten-category shoe domain: rank 10 = class shows
# the attribute the most, 1 = the least.  Used as the default ground truth
# for synthetic datasets.
SHOE_CLASSES = [
    "Athletic", "Boots", "Clogs", "Flats", "Heels",
    "Pumps", "Rain Boots", "Sneakers", "Stiletto", "Wedding",
]
SHOE_ATTRIBUTES = [
    "pointy at the front", "open", "bright in color", "covered with ornaments",
    "shiny", "high at the heel", "long on the leg", "formal", "sporty", "feminine",
]
SHOE_CLASS_ORDERS = np.array(
    [
        [2, 6, 3, 5, 10, 9, 4, 1, 8, 7],
        [3, 2, 8, 5, 7, 6, 1, 4, 9, 10],
        [6, 1, 2, 8, 4, 3, 10, 7, 9, 5],
        [4, 9, 6, 5, 8, 7, 1, 3, 10, 2],
        [2, 9, 4, 3, 6, 5, 8, 1, 10, 7],
        [4, 6, 5, 1, 9, 8, 3, 2, 10, 7],
        [7, 9, 2, 3, 6, 5, 10, 8, 4, 1],
        [3, 6, 4, 7, 9, 8, 1, 2, 5, 10],
        [10, 5, 6, 7, 4, 3, 8, 9, 1, 2],
        [1, 6, 4, 5, 10, 9, 3, 2, 8, 7],
    ],
    dtype=np.int64,
)


def validate_manifest(manifest: DatasetManifest) -> None:
    """Raise ManifestError if any invariant fails; message names the field."""
    n = manifest.n_images
    if n == 0:
        raise ManifestError("images: dataset has no images")
    ids = [rec.id for rec in manifest.images]
    if sorted(ids) != list(range(n)):
        raise ManifestError("images: ids must be dense 0..N-1 without duplicates")
    d = manifest.images[0].features.shape[0]
    if d == 0:
        raise ManifestError("images[0].features: dimension must be > 0")
    for rec in manifest.images:
        if rec.features.shape != (d,):
            raise ManifestError(
                f"images[{rec.id}].features: dimension mismatch "
                f"(got {rec.features.shape[0]}, dataset has d={d})"
            )
        if not np.isfinite(rec.features).all():
            raise ManifestError(f"images[{rec.id}].features: non-finite value")
    m = manifest.n_attributes
    for k, c in enumerate(manifest.comparisons):
        if not 0 <= c.attribute < m:
            raise ManifestError(f"comparisons[{k}].attribute: index {c.attribute} out of range")
        for fld, val in (("first", c.first), ("second", c.second)):
            if not 0 <= val < n:
                raise ManifestError(f"comparisons[{k}].{fld}: dangling id {val}")
        if c.first == c.second:
            raise ManifestError(f"comparisons[{k}]: first == second ({c.first})")
    if manifest.class_orders is not None:
        orders = manifest.class_orders
        if orders.ndim != 2 or orders.shape[0] != m:
            raise ManifestError("class_orders: must be an M x C table")
        for row_idx, row in enumerate(orders):
            # ranks are ordinal strengths; rows taken from a larger table may
            # skip values, so only positivity is enforced
            if row.min() < 1:
                raise ManifestError(f"class_orders[{row_idx}]: ranks must be >= 1")


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    doc = {
        "name": manifest.name,
        "N": manifest.n_images,
        "d": manifest.dim,
        "M": manifest.n_attributes,
        "attribute_names": list(manifest.attribute_names),
        "images": [
            {
                "id": rec.id,
                "features": [float(v) for v in rec.features],
                **({"class_id": rec.class_id} if rec.class_id is not None else {}),
                **({"asset_path": rec.asset_path} if rec.asset_path is not None else {}),
            }
            for rec in manifest.images
        ],
        "comparisons": [
            {
                "attribute": c.attribute,
                "first": c.first,
                "second": c.second,
                "relation": c.relation.value,
                "confidence": c.confidence,
            }
            for c in manifest.comparisons
        ],
    }
    if manifest.class_orders is not None:
        doc["class_orders"] = manifest.class_orders.tolist()
    return doc


def manifest_from_dict(doc: dict) -> DatasetManifest:
    try:
        name = doc["name"]
        n, d, m = int(doc["N"]), int(doc["d"]), int(doc["M"])
        attribute_names = list(doc["attribute_names"])
        raw_images = doc["images"]
        raw_comparisons = doc.get("comparisons", [])
    except KeyError as exc:
        raise ManifestError(f"missing required field {exc.args[0]!r}") from exc
    if len(attribute_names) != m:
        raise ManifestError(f"attribute_names: expected {m} entries, got {len(attribute_names)}")
    if len(raw_images) != n:
        raise ManifestError(f"images: header says N={n} but found {len(raw_images)}")
    images = []
    for k, raw in enumerate(raw_images):
        feats = np.asarray(raw.get("features", []), dtype=np.float64)
        if feats.shape != (d,):
            raise ManifestError(
                f"images[{k}].features: dimension mismatch (got {feats.shape[0] if feats.ndim == 1 else feats.shape}, header says d={d})"
            )
        images.append(
            ImageRecord(
                id=int(raw["id"]),
                features=feats,
                class_id=None if raw.get("class_id") is None else int(raw["class_id"]),
                asset_path=raw.get("asset_path"),
            )
        )
    comparisons = []
    for k, raw in enumerate(raw_comparisons):
        try:
            relation = Relation(raw["relation"])
        except ValueError:
            raise ManifestError(
                f"comparisons[{k}].relation: unknown value {raw.get('relation')!r}"
            ) from None
        comparisons.append(
            ComparisonLabel(
                attribute=int(raw["attribute"]),
                first=int(raw["first"]),
                second=int(raw["second"]),
                relation=relation,
                confidence=int(raw.get("confidence", 2)),
            )
        )
    class_orders = None
    if doc.get("class_orders") is not None:
        class_orders = np.asarray(doc["class_orders"], dtype=np.int64)
    manifest = DatasetManifest(
        name=name,
        attribute_names=attribute_names,
        images=sorted(images, key=lambda r: r.id),
        comparisons=comparisons,
        class_orders=class_orders,
    )
    validate_manifest(manifest)
    return manifest


def dumps_manifest(manifest: DatasetManifest) -> str:
    # json round-trips float64 exactly via repr
    return json.dumps(manifest_to_dict(manifest), indent=None, separators=(",", ":"))


def save_manifest(manifest: DatasetManifest, path) -> None:
    validate_manifest(manifest)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_manifest(manifest))


def load_manifest(path) -> DatasetManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"parse failure at line {exc.lineno}: {exc.msg}") from exc
    return manifest_from_dict(doc)


@dataclass
class SynthConfig:
    n_images: int = 2000
    dim: int = 10
    n_attributes: int = 6
    n_classes: int = 10
    pairs_per_attribute: int = 500
    noise_sd: float | Sequence[float] = 0.0  # label-flip level, scalar or per-attribute
    seed: int = 0
    jitter_sd: float = 1.0
    equality_band_factor: float = 0.25
    class_orders: Optional[np.ndarray] = None
    attribute_names: Optional[Sequence[str]] = None
    name: str = "synthetic"

    def noise_per_attribute(self) -> np.ndarray:
        arr = np.broadcast_to(
            np.asarray(self.noise_sd, dtype=np.float64), (self.n_attributes,)
        )
        return arr

    def validate(self) -> None:
        if not (self.n_images >= self.n_classes >= 2):
            raise ValueError("require N >= C >= 2")
        if self.n_attributes < 1:
            raise ValueError("require M >= 1")
        if self.dim < self.n_attributes:
            raise ValueError("require d >= M")
        if (self.noise_per_attribute() < 0).any() or self.jitter_sd < 0:
            raise ValueError("noise_sd and jitter_sd must be >= 0")
        if self.pairs_per_attribute < 1:
            raise ValueError("pairs_per_attribute must be >= 1")


def synthesize_dataset(config: SynthConfig) -> DatasetManifest:
    """Generate a labeled dataset from a class-order table.

    Deterministic for a fixed seed.  Latent strength of image i on attribute
    m is the class rank plus N(0, jitter_sd) jitter.  The first M feature
    dimensions are the standardized latents (a linear ranker can recover
    them); the rest are pure noise.  Comparisons are EQUAL when the latent
    gap is inside the equality band, otherwise ordered by the latents, and
    ordered labels flip with probability min(0.5, noise_sd).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n, d, m, c = config.n_images, config.dim, config.n_attributes, config.n_classes

    perm = rng.permutation(n)
    class_ids = np.empty(n, dtype=np.int64)
    class_ids[perm] = np.arange(n) % c

    if config.class_orders is not None:
        orders = np.asarray(config.class_orders, dtype=np.int64)
        if orders.shape != (m, c):
            raise ValueError(f"class_orders must have shape ({m}, {c})")
    else:
        orders = np.stack([rng.permutation(c) + 1 for _ in range(m)])

    jitter = rng.normal(0.0, config.jitter_sd, size=(n, m))
    latents = orders.T[class_ids].astype(np.float64) + jitter

    features = np.empty((n, d))
    mean = latents.mean(axis=0)
    sd = latents.std(axis=0)
    sd[sd < 1e-12] = 1.0
    features[:, :m] = (latents - mean) / sd
    if d > m:
        features[:, m:] = rng.normal(size=(n, d - m))

    band = config.equality_band_factor * config.jitter_sd
    noise_levels = config.noise_per_attribute()
    comparisons: list[ComparisonLabel] = []
    for attr in range(m):
        flip_p = min(0.5, float(noise_levels[attr]))
        firsts = rng.integers(0, n, size=config.pairs_per_attribute)
        seconds = rng.integers(0, n, size=config.pairs_per_attribute)
        clash = firsts == seconds
        while clash.any():
            seconds[clash] = rng.integers(0, n, size=int(clash.sum()))
            clash = firsts == seconds
        flips = rng.random(config.pairs_per_attribute) < flip_p
        for i, j, flip in zip(firsts, seconds, flips):
            delta = latents[i, attr] - latents[j, attr]
            if abs(delta) < band:
                relation = Relation.EQUAL
                confidence = 3 if abs(delta) <= band / 2 else 2
            else:
                relation = Relation.MORE if delta > 0 else Relation.LESS
                if flip:
                    relation = Relation.LESS if relation is Relation.MORE else Relation.MORE
                confidence = 3 if abs(delta) > 2 * band else 2
            comparisons.append(
                ComparisonLabel(
                    attribute=attr,
                    first=int(i),
                    second=int(j),
                    relation=relation,
                    confidence=confidence,
                )
            )

    if config.attribute_names is not None:
        names = list(config.attribute_names)
        if len(names) != m:
            raise ValueError("attribute_names length must equal M")
    else:
        names = [f"attribute-{k}" for k in range(m)]

    images = [
        ImageRecord(id=i, features=features[i], class_id=int(class_ids[i]))
        for i in range(n)
    ]
    manifest = DatasetManifest(
        name=config.name,
        attribute_names=names,
        images=images,
        comparisons=comparisons,
        class_orders=orders,
        latents=latents,
    )
    validate_manifest(manifest)
    return manifest


def majority_vote(
    raw_labels: Sequence[tuple[int, int, int, Relation]],
    min_agree: int = 3,
) -> list[ComparisonLabel]:
    """Distill redundant crowd labels into reliable comparison labels.

    Input rows are (attribute, first, second, relation) from multiple
    annotators; a (attribute, first, second) group is kept only when at
    least ``min_agree`` responses (of however many were collected, nominally
    five) agree on one relation.
    """
    groups: dict[tuple[int, int, int], list[Relation]] = {}
    for attribute, first, second, relation in raw_labels:
        groups.setdefault((attribute, first, second), []).append(Relation(relation))
    kept = []
    for (attribute, first, second), votes in groups.items():
        best = max(set(votes), key=lambda r: (votes.count(r), r.value))
        if votes.count(best) >= min_agree:
            kept.append(
                ComparisonLabel(attribute=attribute, first=first, second=second, relation=best)
            )
    return kept
