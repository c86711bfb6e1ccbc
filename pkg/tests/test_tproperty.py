"""Upward label-consistency checking and the grid counterexample."""

import numpy as np
import pytest

from hierattr import (
    InvalidInputError,
    PartitionHierarchy,
    ValueFunction,
    axis_aligned_hierarchy,
    check_t_property,
    make_masked_image_game,
    pixel_sum_scorer,
    prop4_counterexample,
    semantic_hierarchy_for,
)


def test_constant_scorer_passes():
    vf = ValueFunction(16, lambda m: 5.0)
    h = axis_aligned_hierarchy(4, 4, [2])
    assert check_t_property(h, vf, tau=5.0).passed


def test_monotone_additive_passes():
    rng = np.random.default_rng(6)
    img = rng.uniform(1, 255, (4, 4))
    vf = make_masked_image_game(img, "zero", pixel_sum_scorer())
    h = axis_aligned_hierarchy(4, 4, [2])
    report = check_t_property(h, vf, tau=1e-9)
    assert report.passed


def test_infinite_tau_vacuous():
    rng = np.random.default_rng(8)
    table = rng.uniform(-1, 1, 1 << 9)
    vf = ValueFunction(9, lambda m: float(table[m]))
    h = axis_aligned_hierarchy(3, 3, [3])
    assert check_t_property(h, vf, tau=float("inf")).passed
    assert check_t_property(h, vf, tau=float("-inf")).passed


def test_invalid_hierarchy_rejected():
    from hierattr import HierarchyNode

    bad = PartitionHierarchy(3, HierarchyNode(0b011, [HierarchyNode(1), HierarchyNode(2)]))
    with pytest.raises(InvalidInputError):
        check_t_property(bad, ValueFunction(3, lambda m: 0.0), 0.0)


def test_axis_aligned_grid_shapes():
    h = axis_aligned_hierarchy(4, 4, [2])
    assert h.validate().ok
    assert len(h.root.children) == 4
    for tile in h.root.children:
        assert bin(tile.members).count("1") == 4

    h2 = axis_aligned_hierarchy(4, 4, [2, 2])
    assert h2.validate().ok
    assert sum(len(t.children) for t in h2.root.children) == 16


def test_axis_aligned_uneven_absorption():
    h = axis_aligned_hierarchy(5, 5, [2])
    assert h.validate().ok
    sizes = sorted(bin(t.members).count("1") for t in h.root.children)
    assert sum(sizes) == 25
    assert sizes == [4, 6, 6, 9]  # 2/3 row and column split


def test_axis_aligned_rejects_empty():
    with pytest.raises(InvalidInputError):
        axis_aligned_hierarchy(4, 4, [])


def test_counterexample_axis_fails_deterministically():
    a = prop4_counterexample()
    b = prop4_counterexample()
    assert not a.axis_report.passed
    assert a.axis_report.violations == b.axis_report.violations
    assert a.tau == b.tau
    assert (a.image == b.image).all()


def test_counterexample_violation_names_diluted_tile():
    bundle = prop4_counterexample()
    # every reported violation is an above-threshold child under a
    # below-threshold parent
    for child_id, parent_id, cs, ps in bundle.axis_report.violations:
        assert cs >= bundle.tau
        assert ps < bundle.tau


def test_counterexample_semantic_hierarchy_passes():
    bundle = prop4_counterexample()
    built = semantic_hierarchy_for(bundle)
    report = check_t_property(built.hierarchy, bundle.game, bundle.tau)
    assert report.passed


def test_report_serialization():
    bundle = prop4_counterexample()
    doc = bundle.axis_report.to_json_dict()
    assert doc["pass"] is False
    assert doc["tau"] == bundle.tau
    assert len(doc["violations"]) == len(bundle.axis_report.violations)
    assert {"child_id", "parent_id", "child_score", "parent_score"} == set(
        doc["violations"][0]
    )
