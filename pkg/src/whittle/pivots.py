"""Balanced binary search trees of pivot images, one per attribute.

Each node stores the image with the median predicted attribute value of
the subset handed to it; lower-or-equal values descend left, strictly
higher values right (pivot excluded from both).  Trees are built once at
index time and are immutable and shareable afterwards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Relation


@dataclass
class TreeNode:
    pivot_image: int
    pivot_value: float
    subset_size: int
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None


EXHAUSTED = None  # cursor sentinel: no further questions on this attribute


def build_tree(attr_values: np.ndarray) -> TreeNode:
    """Build one attribute's pivot tree over all N images.

    Images are sorted by (value, id); the pivot of a k-item subset is the
    lower median (index floor((k-1)/2)); items before it go left, items
    after it go right, so child sizes never differ by more than one and
    depth stays <= ceil(log2(N+1)).
    """
    values = np.asarray(attr_values, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] == 0:
        raise ValueError("attr_values must be a non-empty vector")
    order = np.lexsort((np.arange(values.shape[0]), values))

    def split(ids: np.ndarray) -> Optional[TreeNode]:
        if ids.size == 0:
            return None
        mid = (ids.size - 1) // 2
        pivot = int(ids[mid])
        return TreeNode(
            pivot_image=pivot,
            pivot_value=float(values[pivot]),
            subset_size=int(ids.size),
            left=split(ids[:mid]),
            right=split(ids[mid + 1 :]),
        )

    return split(order)


@dataclass
class PivotSet:
    """Per-session cursors, one per attribute tree; None means exhausted."""

    cursors: list[Optional[TreeNode]]

    @classmethod
    def at_roots(cls, trees: list[TreeNode]) -> "PivotSet":
        return cls(cursors=list(trees))

    def live_attributes(self) -> list[int]:
        return [m for m, node in enumerate(self.cursors) if node is not None]

    @property
    def exhausted(self) -> bool:
        return all(node is None for node in self.cursors)


def descend(pivot_set: PivotSet, attribute: int, response: Relation) -> PivotSet:
    """Move one attribute's cursor after a response; returns a new PivotSet.

    LESS goes to the left child, MORE to the right, EQUAL (or a missing
    child) ends exploration of that attribute.
    """
    node = pivot_set.cursors[attribute]
    if node is None:
        raise ValueError(f"attribute {attribute} cursor is already exhausted")
    if response is Relation.EQUAL:
        nxt = EXHAUSTED
    elif response is Relation.LESS:
        nxt = node.left
    elif response is Relation.MORE:
        nxt = node.right
    else:
        raise ValueError(f"unknown response {response!r}")
    cursors = list(pivot_set.cursors)
    cursors[attribute] = nxt
    return PivotSet(cursors=cursors)


def tree_depth(node: Optional[TreeNode]) -> int:
    if node is None:
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def in_order_values(node: Optional[TreeNode]) -> list[float]:
    if node is None:
        return []
    return in_order_values(node.left) + [node.pivot_value] + in_order_values(node.right)


def all_pivot_images(node: Optional[TreeNode]) -> list[int]:
    if node is None:
        return []
    return all_pivot_images(node.left) + [node.pivot_image] + all_pivot_images(node.right)


def flatten_tree(root: TreeNode) -> list[dict]:
    """Breadth-first array encoding with child indices, for the index file."""
    order = [root]
    i = 0
    while i < len(order):
        node = order[i]
        for child in (node.left, node.right):
            if child is not None:
                order.append(child)
        i += 1
    index_of = {id(node): k for k, node in enumerate(order)}
    entries = []
    for node in order:
        entry = {"pivot_image": node.pivot_image, "pivot_value": node.pivot_value}
        if node.left is not None:
            entry["left_index"] = index_of[id(node.left)]
        if node.right is not None:
            entry["right_index"] = index_of[id(node.right)]
        entries.append(entry)
    return entries


def unflatten_tree(entries: list[dict]) -> TreeNode:
    def build(idx: int) -> TreeNode:
        raw = entries[idx]
        left = build(raw["left_index"]) if "left_index" in raw else None
        right = build(raw["right_index"]) if "right_index" in raw else None
        size = 1 + (left.subset_size if left else 0) + (right.subset_size if right else 0)
        return TreeNode(
            pivot_image=int(raw["pivot_image"]),
            pivot_value=float(raw["pivot_value"]),
            subset_size=size,
            left=left,
            right=right,
        )

    return build(0)


def save_trees(trees: list[TreeNode], attribute_names: list[str], path) -> None:
    doc = {name: flatten_tree(tree) for name, tree in zip(attribute_names, trees)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_trees(path, attribute_names: list[str]) -> list[TreeNode]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    missing = [name for name in attribute_names if name not in doc]
    if missing:
        raise ValueError(f"index file is missing trees for attributes: {missing}")
    return [unflatten_tree(doc[name]) for name in attribute_names]
