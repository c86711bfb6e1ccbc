"""Owen attribution over coalition hierarchies.

The multi-level value sums, for each feature, over subsets of the sibling
coalitions of its ancestor at every level and over subsets of its own leaf
group.  At a level whose sibling family has m members the subset weight is
1 / (m * C(m-1, s)), the same divisor kernel as for Shapley.  The marginal
term evaluates the model on the union of all selected coalitions' features
with and without the feature itself.
"""

from __future__ import annotations

import itertools
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import CapacityError, InvalidInputError
from .games import EvalCache, ValueFunction, cached_evaluate, indices_from_mask, popcount
from .hierarchy import HierarchyNode, PartitionHierarchy
from .shapley import Attribution

PER_FEATURE_LIMIT = 1 << 20
ORACLE_PERMUTATION_LIMIT = 10**6

PartitionLike = Union[PartitionHierarchy, Sequence[Sequence[int]]]


def _as_groups(partition: PartitionLike, n: Optional[int] = None) -> List[List[int]]:
    if isinstance(partition, PartitionHierarchy):
        report = partition.validate()
        if not report.ok:
            raise InvalidInputError("invalid partition: " + "; ".join(report.issues))
        if partition.normalized().depth() > 2:
            raise InvalidInputError("owen_single_level expects a flat 2-level partition")
        return [
            sorted(indices_from_mask(c.members)) for c in partition.root.children
        ]
    return [sorted(g) for g in partition]


def owen_single_level(
    vf: ValueFunction,
    partition: PartitionLike,
    cache: Optional[EvalCache] = None,
) -> Attribution:
    """Single-level Owen value by direct double enumeration.

    ``partition`` is a flat grouping of the features (list of index lists or
    a depth-2 hierarchy).  Kept as a separate enumeration path from
    owen_multilevel so the two can cross-check each other.
    """
    n = vf.n
    groups = _as_groups(partition, n)
    _check_partition(groups, n)
    cache = cache if cache is not None else EvalCache()
    group_masks = [sum(1 << i for i in g) for g in groups]
    K = len(groups)
    phi = np.zeros(n)
    for k, g in enumerate(groups):
        other_masks = [m for j, m in enumerate(group_masks) if j != k]
        size = len(g)
        for i in g:
            rest = [j for j in g if j != i]
            for t in range(K):
                w_t = 1.0 / (K * math.comb(K - 1, t))
                for chosen in itertools.combinations(other_masks, t):
                    mask_t = 0
                    for m in chosen:
                        mask_t |= m
                    for s in range(size):
                        w_s = 1.0 / (size * math.comb(size - 1, s))
                        for inner in itertools.combinations(rest, s):
                            mask = mask_t
                            for j in inner:
                                mask |= 1 << j
                            delta = cached_evaluate(vf, cache, mask | (1 << i)) - cached_evaluate(vf, cache, mask)
                            phi[i] += w_t * w_s * delta
    return Attribution(phi, "owen_single", cache.stats())


def _check_partition(groups: Sequence[Sequence[int]], n: int) -> None:
    seen = 0
    for g in groups:
        if not g:
            raise InvalidInputError("empty group in partition")
        for i in g:
            if not 0 <= i < n:
                raise InvalidInputError(f"feature {i} out of range [0, {n})")
            if seen & (1 << i):
                raise InvalidInputError(f"feature {i} appears in two groups")
            seen |= 1 << i
    if seen != (1 << n) - 1:
        missing = indices_from_mask(((1 << n) - 1) & ~seen)
        raise InvalidInputError(f"partition misses features {missing}")


def _validated(h: PartitionHierarchy) -> PartitionHierarchy:
    # normalize first: non-uniform leaf depth is repaired by pass-through
    # padding, so only genuine partition violations should be fatal
    h = h.normalized()
    report = h.validate()
    if not report.ok:
        raise InvalidInputError("invalid hierarchy: " + "; ".join(report.issues))
    return h


def _subset_unions(masks: List[int]) -> Tuple[List[int], np.ndarray]:
    """Union and cardinality for every subset of ``masks``, indexed by the
    subset's own bit pattern."""
    k = len(masks)
    unions = [0] * (1 << k)
    sizes = np.zeros(1 << k, dtype=np.int64)
    for bit in range(k):
        step = 1 << bit
        for idx in range(step, 2 * step):
            unions[idx] = unions[idx - step] | masks[bit]
            sizes[idx] = sizes[idx - step] + 1
    return unions, sizes


def _subset_table(masks: List[int], family_size: int) -> Tuple[List[int], np.ndarray]:
    """All subset unions of ``masks`` with weights 1/(m * C(m-1, s)) where
    m = ``family_size`` (the sibling family including the fixed member, so
    len(masks) must be m - 1)."""
    unions, sizes = _subset_unions(masks)
    w = np.array(
        [1.0 / (family_size * math.comb(family_size - 1, s)) for s in range(len(masks) + 1)]
    )
    return unions, w[sizes]


def per_feature_eval_counts(h: PartitionHierarchy) -> List[int]:
    """Subset-combination count per feature: product over levels of
    2^(sibling family size), skipping size-1 pass-through families."""
    h = _validated(h)
    counts: List[int] = [0] * h.n_features

    def walk(node: HierarchyNode, factor: int):
        if node.is_leaf:
            counts[indices_from_mask(node.members)[0]] = factor
            return
        if all(c.is_leaf for c in node.children):
            g = len(node.children)
            leaf_factor = factor * (2**g if g > 1 else 1)
            for c in node.children:
                counts[indices_from_mask(c.members)[0]] = leaf_factor
            return
        m = len(node.children)
        child_factor = factor * (2**m if m > 1 else 1)
        for c in node.children:
            walk(c, child_factor)

    walk(h.root, 1)
    return counts


def predicted_eval_count(h: PartitionHierarchy) -> int:
    """Worst-case per-feature subset-combination count for ``h``.

    For a balanced hierarchy with fan-out n and depth L this is 2^(n*L),
    e.g. 4096 for the 2x5x5 layout over 50 features.
    """
    return max(per_feature_eval_counts(h))


def owen_multilevel(
    vf: ValueFunction,
    h: PartitionHierarchy,
    cache: Optional[EvalCache] = None,
    limit: int = PER_FEATURE_LIMIT,
) -> Attribution:
    """Multi-level Owen value for every feature of the game.

    Walks the hierarchy once, carrying the accumulated coalition contexts
    (mask, weight) downward; at each leaf group the value table over
    context x subset is fetched in one batched cache call and contracted
    against per-feature weight vectors.  A flat all-singleton hierarchy
    makes this exactly the Shapley value.
    """
    if h.n_features != vf.n:
        raise InvalidInputError(
            f"hierarchy covers {h.n_features} features but game has {vf.n}"
        )
    h = _validated(h)
    worst = max(per_feature_eval_counts(h))
    if worst > limit:
        raise CapacityError(
            f"per-feature subset-combination count {worst} exceeds limit {limit}"
        )
    cache = cache if cache is not None else EvalCache()
    phi = np.zeros(vf.n)

    def leaf_group(node: HierarchyNode, ctx_masks: List[int], ctx_w: np.ndarray):
        bits = [c.members for c in node.children]
        g = len(bits)
        sub_masks, sizes = _subset_unions(bits)
        all_masks = [cm | sm for cm in ctx_masks for sm in sub_masks]
        values = cache.evaluate_many(vf, all_masks).reshape(len(ctx_masks), 1 << g)
        contrib = ctx_w @ values  # weighted over contexts, per subset
        w_with = np.array(
            [1.0 / (g * math.comb(g - 1, s - 1)) if s >= 1 else 0.0 for s in range(g + 1)]
        )
        w_without = np.array(
            [1.0 / (g * math.comb(g - 1, s)) if s < g else 0.0 for s in range(g + 1)]
        )
        idx = np.arange(1 << g)
        for p, bit_mask in enumerate(bits):
            has = ((idx >> p) & 1).astype(bool)
            wvec = np.where(has, w_with[sizes], -w_without[sizes])
            phi[indices_from_mask(bit_mask)[0]] += contrib @ wvec

    def walk(node: HierarchyNode, ctx_masks: List[int], ctx_w: np.ndarray):
        if node.is_leaf:  # n_features == 1 degenerate root
            phi[indices_from_mask(node.members)[0]] += float(
                np.sum(
                    ctx_w
                    * (
                        cache.evaluate_many(vf, [cm | node.members for cm in ctx_masks])
                        - cache.evaluate_many(vf, ctx_masks)
                    )
                )
            )
            return
        if all(c.is_leaf for c in node.children):
            leaf_group(node, ctx_masks, ctx_w)
            return
        m = len(node.children)
        for k, child in enumerate(node.children):
            sibling_masks = [c.members for j, c in enumerate(node.children) if j != k]
            sub_masks, sub_w = _subset_table(sibling_masks, m)
            new_masks = [cm | sm for cm in ctx_masks for sm in sub_masks]
            new_w = np.outer(ctx_w, sub_w).ravel()
            walk(child, new_masks, new_w)

    walk(h.root, [0], np.array([1.0]))
    return Attribution(phi, "owen_multi", cache.stats())


def consistent_permutation_count(h: PartitionHierarchy) -> int:
    """Number of orderings in which sibling blocks stay contiguous at every
    level: the product of (child count)! over all internal nodes."""
    total = 1

    def walk(node: HierarchyNode):
        nonlocal total
        if node.is_leaf:
            return
        total *= math.factorial(len(node.children))
        for c in node.children:
            walk(c)

    walk(h.root)
    return total


def nested_permutation_oracle(
    vf: ValueFunction,
    h: PartitionHierarchy,
    cache: Optional[EvalCache] = None,
    limit: int = ORACLE_PERMUTATION_LIMIT,
) -> Attribution:
    """Brute-force oracle for the multi-level Owen value.

    Averages the marginal contribution of each feature over every
    hierarchy-consistent permutation.  Independent of the subset-sum path
    in owen_multilevel.
    """
    if h.n_features != vf.n:
        raise InvalidInputError(
            f"hierarchy covers {h.n_features} features but game has {vf.n}"
        )
    h = _validated(h)
    count = consistent_permutation_count(h)
    if count > limit:
        raise CapacityError(
            f"{count} consistent permutations exceed the oracle limit {limit}"
        )
    cache = cache if cache is not None else EvalCache()

    def orderings(node: HierarchyNode):
        if node.is_leaf:
            yield [indices_from_mask(node.members)[0]]
            return
        for perm in itertools.permutations(node.children):
            for combo in itertools.product(*(list(orderings(c)) for c in perm)):
                yield [i for part in combo for i in part]

    phi = np.zeros(vf.n)
    total = 0
    for order in orderings(h.root):
        mask = 0
        prev = cached_evaluate(vf, cache, 0)
        for i in order:
            mask |= 1 << i
            cur = cached_evaluate(vf, cache, mask)
            phi[i] += cur - prev
            prev = cur
        total += 1
    phi /= total
    return Attribution(phi, "owen_multi", cache.stats())
