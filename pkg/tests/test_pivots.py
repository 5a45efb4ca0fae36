import numpy as np
import pytest

from whittle.dataset import Relation
from whittle.pivots import (
    PivotSet,
    all_pivot_images,
    build_tree,
    descend,
    flatten_tree,
    in_order_values,
    load_trees,
    save_trees,
    tree_depth,
    unflatten_tree,
)


def reference_tree(values, ids):
    """Brute-force oracle: sort by (value, id), lower median, partition."""
    if len(ids) == 0:
        return None
    rows = sorted(ids, key=lambda i: (values[i], i))
    mid = (len(rows) - 1) // 2
    return {
        "pivot": rows[mid],
        "left": reference_tree(values, rows[:mid]),
        "right": reference_tree(values, rows[mid + 1 :]),
    }


def trees_match(node, ref):
    if node is None and ref is None:
        return True
    if (node is None) != (ref is None):
        return False
    return (
        node.pivot_image == ref["pivot"]
        and trees_match(node.left, ref["left"])
        and trees_match(node.right, ref["right"])
    )


def check_invariants(node):
    """Balance, value partition, and no pivot reuse at every node."""
    if node is None:
        return set()
    left_ids = check_invariants(node.left)
    right_ids = check_invariants(node.right)
    assert not (left_ids & right_ids)
    assert node.pivot_image not in left_ids | right_ids
    left_size = node.left.subset_size if node.left else 0
    right_size = node.right.subset_size if node.right else 0
    assert abs(left_size - right_size) <= 1
    assert node.subset_size == 1 + left_size + right_size
    return left_ids | right_ids | {node.pivot_image}


class TestBuildTree:
    def test_seven_values(self):
        tree = build_tree(np.arange(1.0, 8.0))
        assert tree.pivot_value == 4.0
        assert tree.left.subset_size == 3
        assert tree.right.subset_size == 3

    def test_eight_values_lower_median(self):
        values = np.arange(1.0, 9.0)
        tree = build_tree(values)
        assert tree.pivot_value == 4.0
        assert tree.left.subset_size == 3
        assert tree.right.subset_size == 4
        assert trees_match(tree, reference_tree(values, list(range(8))))

    def test_single_image(self):
        tree = build_tree(np.array([3.5]))
        assert tree.pivot_image == 0
        assert tree.left is None and tree.right is None

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            build_tree(np.array([]))

    @pytest.mark.parametrize("n", [1, 2, 5, 100, 333])
    def test_structural_invariants(self, n, rng):
        values = rng.normal(size=n)
        tree = build_tree(values)
        ids = check_invariants(tree)
        assert ids == set(range(n))
        in_order = in_order_values(tree)
        assert all(a <= b for a, b in zip(in_order, in_order[1:]))
        assert tree_depth(tree) <= int(np.ceil(np.log2(n + 1)))
        assert trees_match(tree, reference_tree(values, list(range(n))))

    def test_ties_broken_by_id(self):
        values = np.zeros(5)
        tree = build_tree(values)
        assert check_invariants(tree) == set(range(5))


class TestDescend:
    def test_more_goes_right(self):
        tree = build_tree(np.arange(1.0, 8.0))
        ps = PivotSet(cursors=[tree])
        after = descend(ps, 0, Relation.MORE)
        assert after.cursors[0].pivot_value == 6.0

    def test_equal_exhausts(self):
        tree = build_tree(np.arange(1.0, 8.0))
        ps = PivotSet(cursors=[tree])
        after = descend(ps, 0, Relation.EQUAL)
        assert after.cursors[0] is None
        assert after.exhausted

    def test_leaf_more_exhausts(self):
        tree = build_tree(np.array([1.0]))
        ps = PivotSet(cursors=[tree])
        assert descend(ps, 0, Relation.MORE).cursors[0] is None

    def test_descending_exhausted_rejected(self):
        ps = PivotSet(cursors=[None])
        with pytest.raises(ValueError, match="exhausted"):
            descend(ps, 0, Relation.LESS)

    def test_descend_is_non_destructive(self):
        tree = build_tree(np.arange(1.0, 8.0))
        ps = PivotSet(cursors=[tree])
        descend(ps, 0, Relation.MORE)
        assert ps.cursors[0] is tree


class TestSerialization:
    def test_flatten_roundtrip(self, rng):
        tree = build_tree(rng.normal(size=57))
        rebuilt = unflatten_tree(flatten_tree(tree))
        assert trees_match_nodes(tree, rebuilt)

    def test_save_load(self, tmp_path, rng):
        trees = [build_tree(rng.normal(size=20)) for _ in range(3)]
        names = ["a", "b", "c"]
        path = tmp_path / "index.json"
        save_trees(trees, names, path)
        loaded = load_trees(path, names)
        for original, restored in zip(trees, loaded):
            assert trees_match_nodes(original, restored)

    def test_missing_attribute_rejected(self, tmp_path, rng):
        path = tmp_path / "index.json"
        save_trees([build_tree(rng.normal(size=4))], ["a"], path)
        with pytest.raises(ValueError, match="missing trees"):
            load_trees(path, ["a", "b"])


def trees_match_nodes(a, b):
    if a is None and b is None:
        return True
    if (a is None) != (b is None):
        return False
    return (
        a.pivot_image == b.pivot_image
        and a.pivot_value == b.pivot_value
        and a.subset_size == b.subset_size
        and trees_match_nodes(a.left, b.left)
        and trees_match_nodes(a.right, b.right)
    )
