"""Rooted partition trees over a feature set.

The root covers every feature, each internal node's children partition it
exactly, and every leaf is a single feature.  Levels are numbered from the
root's children (level 1, the coarsest grouping) down to the leaves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

from .errors import InvalidInputError
from .games import full_mask, indices_from_mask, mask_from_indices, popcount


class HierarchyNode:
    __slots__ = ("members", "children", "node_id")

    def __init__(self, members: int, children: Optional[List["HierarchyNode"]] = None):
        self.members = members
        self.children = children or []
        self.node_id = -1

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def __repr__(self):
        return f"HierarchyNode(members={indices_from_mask(self.members)}, children={len(self.children)})"


@dataclass
class ValidationReport:
    issues: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


class PartitionHierarchy:
    """Immutable-after-construction partition tree with stable node ids."""

    def __init__(self, n_features: int, root: HierarchyNode):
        if n_features < 1:
            raise InvalidInputError("hierarchy needs at least one feature")
        self.n_features = n_features
        self.root = root
        self._assign_ids()

    def _assign_ids(self):
        # breadth-first ids make serialization and reports deterministic
        queue = [self.root]
        next_id = 0
        while queue:
            node = queue.pop(0)
            node.node_id = next_id
            next_id += 1
            queue.extend(node.children)
        self.node_count = next_id

    # -- construction helpers -------------------------------------------

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[int]], n_features: Optional[int] = None) -> "PartitionHierarchy":
        """Flat partition: root -> one node per group -> singleton leaves."""
        if n_features is None:
            n_features = sum(len(g) for g in groups)
        group_nodes = []
        for g in groups:
            leaves = [HierarchyNode(1 << i) for i in sorted(g)]
            group_nodes.append(
                HierarchyNode(mask_from_indices(g, n_features), leaves)
            )
        root = HierarchyNode(full_mask(n_features), group_nodes)
        return cls(n_features, root)

    @classmethod
    def from_nested(cls, spec, n_features: int) -> "PartitionHierarchy":
        """Build from nested lists, e.g. [[0, 1], [[2], [3, 4]]]."""

        def build(item) -> HierarchyNode:
            if isinstance(item, int):
                return HierarchyNode(1 << item)
            children = [build(sub) for sub in item]
            members = 0
            for c in children:
                members |= c.members
            return HierarchyNode(members, children)

        node = build(spec)
        if node.members != full_mask(n_features):
            node = HierarchyNode(full_mask(n_features), [node])
        return cls(n_features, node)

    @classmethod
    def singletons(cls, n_features: int) -> "PartitionHierarchy":
        root = HierarchyNode(
            full_mask(n_features), [HierarchyNode(1 << i) for i in range(n_features)]
        )
        return cls(n_features, root)

    @classmethod
    def balanced(cls, fanouts: Sequence[int]) -> "PartitionHierarchy":
        """Balanced tree with the given fan-out per level; leaves are the
        product of the fan-outs (e.g. [2, 5, 5] covers 50 features)."""
        n = 1
        for f in fanouts:
            if f < 1:
                raise InvalidInputError("fan-outs must be positive")
            n *= f

        def build(lo: int, hi: int, level: int) -> HierarchyNode:
            members = mask_from_indices(range(lo, hi), n)
            if level == len(fanouts):
                assert hi - lo == 1
                return HierarchyNode(members)
            step = (hi - lo) // fanouts[level]
            children = [
                build(lo + k * step, lo + (k + 1) * step, level + 1)
                for k in range(fanouts[level])
            ]
            return HierarchyNode(members, children)

        return cls(n, build(0, n, 0))

    # -- structure queries ----------------------------------------------

    def depth(self) -> int:
        def d(node):
            if node.is_leaf:
                return 0
            return 1 + max(d(c) for c in node.children)

        return d(self.root)

    def levels(self) -> List[List[HierarchyNode]]:
        """Nodes per depth, index 0 = root."""
        out, frontier = [], [self.root]
        while frontier:
            out.append(frontier)
            frontier = [c for node in frontier for c in node.children]
        return out

    def iter_edges(self):
        """Yield (parent, child) pairs in breadth-first order."""
        queue = [self.root]
        while queue:
            node = queue.pop(0)
            for c in node.children:
                yield node, c
                queue.append(c)

    # -- validation ------------------------------------------------------

    def validate(self) -> ValidationReport:
        return validate_hierarchy(self, self.n_features)

    def normalized(self) -> "PartitionHierarchy":
        """Pad with single-child pass-through nodes so that every leaf sits
        at the same depth.  Pass-through levels have sibling-set size 1 and
        carry weight 1 in the attribution sums, so values are unchanged."""
        target = self.depth()

        def pad(node: HierarchyNode, depth: int) -> HierarchyNode:
            if node.is_leaf:
                out = HierarchyNode(node.members)
                for _ in range(target - depth):
                    out = HierarchyNode(node.members, [out])
                return out
            return HierarchyNode(
                node.members, [pad(c, depth + 1) for c in node.children]
            )

        return PartitionHierarchy(self.n_features, pad(self.root, 0))

    # -- serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        def encode(node):
            doc = {"members": indices_from_mask(node.members)}
            if node.children:
                doc["children"] = [encode(c) for c in node.children]
            else:
                doc["children"] = []
            return doc

        return {"n_features": self.n_features, "root": encode(self.root)}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PartitionHierarchy":
        try:
            n = int(doc["n_features"])
            root_doc = doc["root"]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed hierarchy document: {exc}")

        def decode(d) -> HierarchyNode:
            members = mask_from_indices(d["members"], n)
            children = [decode(c) for c in d.get("children", [])]
            return HierarchyNode(members, children)

        h = cls(n, decode(root_doc))
        report = h.validate()
        if not report.ok:
            raise InvalidInputError(
                "invalid hierarchy document: " + "; ".join(report.issues)
            )
        return h

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "PartitionHierarchy":
        return cls.from_json_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, PartitionHierarchy):
            return NotImplemented
        return self.to_json_dict() == other.to_json_dict()


def validate_hierarchy(h: PartitionHierarchy, n_features: int) -> ValidationReport:
    """Report partition violations: overlaps, coverage gaps, non-singleton
    leaves, and non-uniform leaf depth.  Valid hierarchies get an empty
    report."""
    issues: List[str] = []
    root = h.root
    everything = full_mask(n_features)
    if root.members != everything:
        missing = indices_from_mask(everything & ~root.members)
        extra = indices_from_mask(root.members & ~everything)
        if missing:
            issues.append(f"root does not cover features {missing}")
        if extra:
            issues.append(f"root contains out-of-range features {extra}")

    leaf_depths = set()

    def walk(node: HierarchyNode, depth: int):
        if node.is_leaf:
            leaf_depths.add(depth)
            if popcount(node.members) != 1:
                issues.append(
                    f"leaf node {node.node_id} holds features "
                    f"{indices_from_mask(node.members)}; leaves must be singletons"
                )
            return
        union, seen = 0, 0
        for c in node.children:
            overlap = seen & c.members
            if overlap:
                issues.append(
                    f"children of node {node.node_id} overlap on features "
                    f"{indices_from_mask(overlap)}"
                )
            seen |= c.members
            union |= c.members
        gap = node.members & ~union
        if gap:
            issues.append(
                f"children of node {node.node_id} miss features "
                f"{indices_from_mask(gap)}"
            )
        stray = union & ~node.members
        if stray:
            issues.append(
                f"children of node {node.node_id} add features "
                f"{indices_from_mask(stray)} outside their parent"
            )
        for c in node.children:
            walk(c, depth + 1)

    walk(root, 0)
    if len(leaf_depths) > 1:
        issues.append(f"non-uniform leaf depth: {sorted(leaf_depths)}")
    return ValidationReport(issues)
