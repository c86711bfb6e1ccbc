"""Hierarchy consistency checking and the axis-aligned baseline partitioner.

A hierarchy is consistent (for a threshold tau) when every segment scoring
at least tau has a parent that also scores at least tau.  Rigid grid
partitions can break this: a tile dominated by background dilutes the
signal of a high-scoring child it happens to contain.  The bundled
counterexample constructs exactly that situation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import InvalidInputError
from .games import EvalCache, MaskedImageGame, ValueFunction, make_masked_image_game
from .hierarchy import HierarchyNode, PartitionHierarchy
from .models import template_mean_scorer
from .segmentation import BuildResult, SegmentationConfig, build_hierarchy


@dataclass
class TPropertyReport:
    tau: float
    # (child node id, parent node id, child score, parent score)
    violations: List[Tuple[int, int, float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "tau": self.tau,
            "pass": self.passed,
            "violations": [
                {
                    "child_id": c,
                    "parent_id": p,
                    "child_score": cs,
                    "parent_score": ps,
                }
                for c, p, cs, ps in self.violations
            ],
        }


def check_t_property(
    h: PartitionHierarchy,
    vf: ValueFunction,
    tau: float,
    cache: Optional[EvalCache] = None,
) -> TPropertyReport:
    """Verify that positive labels propagate upward across adjacent levels.

    Every node is scored by masked evaluation of its member set; a pair
    (child, parent) violates the property when the child scores >= tau but
    the parent does not.  All violating pairs are reported.
    """
    h = h.normalized()
    report = h.validate()
    if not report.ok:
        raise InvalidInputError("invalid hierarchy: " + "; ".join(report.issues))
    cache = cache if cache is not None else EvalCache()
    nodes: List[HierarchyNode] = []
    queue = [h.root]
    while queue:
        node = queue.pop(0)
        nodes.append(node)
        queue.extend(node.children)
    scores = cache.evaluate_many(vf, [node.members for node in nodes])
    score_of = {node.node_id: float(s) for node, s in zip(nodes, scores)}
    violations = []
    for parent, child in h.iter_edges():
        cs, ps = score_of[child.node_id], score_of[parent.node_id]
        if cs >= tau and not ps >= tau:
            violations.append((child.node_id, parent.node_id, cs, ps))
    return TPropertyReport(tau, violations)


def _bands(extent: int, parts: int) -> List[Tuple[int, int]]:
    # first parts-1 bands take extent // parts cells, the last absorbs the rest
    base = max(1, extent // parts)
    bounds = []
    start = 0
    for k in range(parts - 1):
        if start + base > extent - (parts - 1 - k):
            break
        bounds.append((start, start + base))
        start += base
    bounds.append((start, extent))
    return bounds


def axis_aligned_hierarchy(
    width: int, height: int, grid_per_level: List[int]
) -> PartitionHierarchy:
    """Rigid rectangular-grid hierarchy over an image.

    Each level splits every tile of the previous level into a g x g grid;
    remainder rows/columns are absorbed into the last band.  Leaves are
    single pixels.
    """
    if not grid_per_level:
        raise InvalidInputError("grid_per_level must not be empty")
    if width < 1 or height < 1:
        raise InvalidInputError("image dimensions must be positive")

    n = width * height

    def tile_node(r0: int, r1: int, c0: int, c1: int, level: int) -> HierarchyNode:
        members = 0
        for r in range(r0, r1):
            for c in range(c0, c1):
                members |= 1 << (r * width + c)
        if level == len(grid_per_level):
            children = [
                HierarchyNode(1 << (r * width + c))
                for r in range(r0, r1)
                for c in range(c0, c1)
            ]
            if len(children) == 1:
                return children[0]
            return HierarchyNode(members, children)
        g = grid_per_level[level]
        row_bands = _bands(r1 - r0, g)
        col_bands = _bands(c1 - c0, g)
        if len(row_bands) == 1 and len(col_bands) == 1:
            # tile too small to split further; fall through to pixels
            return tile_node(r0, r1, c0, c1, len(grid_per_level))
        children = [
            tile_node(r0 + rb[0], r0 + rb[1], c0 + cb[0], c0 + cb[1], level + 1)
            for rb in row_bands
            for cb in col_bands
        ]
        return HierarchyNode(members, children)

    root = tile_node(0, height, 0, width, 0)
    if root.is_leaf:
        root = HierarchyNode(root.members, [])
    h = PartitionHierarchy(n, root)
    return PartitionHierarchy(n, h.normalized().root)


@dataclass
class CounterexampleBundle:
    image: np.ndarray
    game: MaskedImageGame
    tau: float
    axis_hierarchy: PartitionHierarchy
    axis_report: TPropertyReport


def prop4_counterexample() -> CounterexampleBundle:
    """Fixed instance where grid partitioning breaks upward consistency.

    A bright 10x10 object sits on a dark 32x32 background, offset so one
    grid tile catches a single object pixel.  Scoring is the global mean of
    the mean-masked image, so a segment's score rises with the object mass
    it retains and falls with every background pixel it drags in.  With
    tau at the full-image mean, the object pixel in the diluted tile is
    positive while its tile is not; the edge-based hierarchy on the same
    image and threshold keeps all positive children under positive parents.
    """
    size = 32
    image = np.zeros((size, size), dtype=float)
    image[7:17, 7:17] = 200.0  # straddles the 8-pixel tile grid at one corner
    game = make_masked_image_game(image, "mean", template_mean_scorer())
    tau = float(image.mean())
    axis_h = axis_aligned_hierarchy(size, size, [2, 2])
    axis_report = check_t_property(axis_h, game, tau)
    return CounterexampleBundle(image, game, tau, axis_h, axis_report)


def semantic_hierarchy_for(
    bundle: CounterexampleBundle, config: Optional[SegmentationConfig] = None
) -> BuildResult:
    """Edge-based hierarchy for the counterexample image (passes the check)."""
    return build_hierarchy(bundle.image, bundle.game, config or SegmentationConfig())
