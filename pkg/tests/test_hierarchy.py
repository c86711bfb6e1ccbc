"""Partition-tree construction, validation, normalization, serialization."""

import numpy as np
import pytest

from hierattr import (
    HierarchyNode,
    InvalidInputError,
    PartitionHierarchy,
    full_mask,
    mask_from_indices,
)


def test_flat_partition_valid():
    h = PartitionHierarchy.from_groups([[0, 1], [2, 3]])
    assert h.validate().ok
    assert h.depth() == 2
    assert h.n_features == 4


def test_overlap_detected():
    root = HierarchyNode(
        full_mask(4),
        [
            HierarchyNode(mask_from_indices([0, 1], 4), [HierarchyNode(1), HierarchyNode(2)]),
            HierarchyNode(
                mask_from_indices([1, 2, 3], 4),
                [HierarchyNode(2), HierarchyNode(4), HierarchyNode(8)],
            ),
        ],
    )
    report = PartitionHierarchy(4, root).validate()
    assert not report.ok
    assert any("overlap" in issue for issue in report.issues)


def test_gap_detected():
    root = HierarchyNode(
        full_mask(3),
        [HierarchyNode(mask_from_indices([0, 1], 3), [HierarchyNode(1), HierarchyNode(2)])],
    )
    report = PartitionHierarchy(3, root).validate()
    assert not report.ok
    assert any("miss" in issue for issue in report.issues)


def test_non_singleton_leaf_detected():
    root = HierarchyNode(full_mask(3), [HierarchyNode(0b011), HierarchyNode(0b100)])
    report = PartitionHierarchy(3, root).validate()
    assert any("singleton" in issue for issue in report.issues)


def test_non_uniform_depth_detected():
    root = HierarchyNode(
        full_mask(3),
        [
            HierarchyNode(0b011, [HierarchyNode(0b001), HierarchyNode(0b010)]),
            HierarchyNode(0b100),
        ],
    )
    report = PartitionHierarchy(3, root).validate()
    assert any("depth" in issue for issue in report.issues)


def test_normalized_pads_to_uniform_depth():
    root = HierarchyNode(
        full_mask(3),
        [
            HierarchyNode(0b011, [HierarchyNode(0b001), HierarchyNode(0b010)]),
            HierarchyNode(0b100),
        ],
    )
    h = PartitionHierarchy(3, root).normalized()
    assert h.validate().ok
    depths = {len(path) for path in _leaf_paths(h.root)}
    assert len(depths) == 1


def _leaf_paths(node, prefix=()):
    if not node.children:
        yield prefix + (node.node_id,)
        return
    for c in node.children:
        yield from _leaf_paths(c, prefix + (node.node_id,))


def test_balanced_tree_shape():
    h = PartitionHierarchy.balanced([2, 5, 5])
    assert h.n_features == 50
    assert h.validate().ok
    assert h.depth() == 3
    assert len(h.root.children) == 2
    assert all(len(c.children) == 5 for c in h.root.children)


def test_singletons():
    h = PartitionHierarchy.singletons(5)
    assert h.validate().ok
    assert h.depth() == 1
    assert len(h.root.children) == 5


def test_from_nested():
    h = PartitionHierarchy.from_nested([[0, 1], [[2], [3, 4]]], 5)
    assert h.n_features == 5
    # mixed nesting depth is flagged until normalized
    assert any("depth" in issue for issue in h.validate().issues)
    assert h.normalized().validate().ok


def test_levels_and_edges():
    h = PartitionHierarchy.from_groups([[0, 1], [2]])
    levels = h.levels()
    assert len(levels[0]) == 1 and len(levels[1]) == 2 and len(levels[2]) == 3
    edges = list(h.iter_edges())
    assert len(edges) == 5
    # breadth-first ids are stable and deterministic
    assert [n.node_id for lvl in levels for n in lvl] == list(range(h.node_count))


def test_json_roundtrip():
    h = PartitionHierarchy.balanced([2, 3])
    doc = h.to_json()
    back = PartitionHierarchy.from_json(doc)
    assert back == h
    assert back.to_json() == doc


def test_json_rejects_invalid():
    with pytest.raises(InvalidInputError):
        PartitionHierarchy.from_json('{"n_features": 3, "root": {"members": [0, 1], "children": []}}')
    with pytest.raises(InvalidInputError):
        PartitionHierarchy.from_json_dict({"n_features": 2})


def test_single_feature_hierarchy():
    h = PartitionHierarchy(1, HierarchyNode(1))
    assert h.validate().ok
    assert h.depth() == 0
