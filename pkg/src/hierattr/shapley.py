"""Exact Shapley attribution by subset enumeration, plus sampling and a
permutation brute-force oracle.

The subset weight is the classical kernel |S|! (n-|S|-1)! / n!, written as
1 / (n * C(n-1, |S|)); only this reading closes the efficiency axiom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CapacityError, InvalidInputError
from .games import EvalCache, ValueFunction, cached_evaluate, full_mask

EXACT_FEATURE_LIMIT = 24
ORACLE_FEATURE_LIMIT = 8


@dataclass
class Attribution:
    """Per-feature scores plus evaluation-count metadata."""

    scores: np.ndarray
    method: str
    eval_stats: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.scores)


def subset_weights(n: int) -> np.ndarray:
    """Weight per subset size s: 1 / (n * C(n-1, s)), s = 0..n-1."""
    return np.array([1.0 / (n * math.comb(n - 1, s)) for s in range(n)])


def _popcounts(n: int) -> np.ndarray:
    counts = np.zeros(1 << n, dtype=np.int64)
    idx = np.arange(1 << n, dtype=np.int64)
    for i in range(n):
        counts += (idx >> i) & 1
    return counts


def _all_values(vf: ValueFunction, cache: EvalCache) -> np.ndarray:
    return cache.evaluate_many(vf, range(1 << vf.n))


def exact_shapley(
    vf: ValueFunction,
    cache: Optional[EvalCache] = None,
    limit: int = EXACT_FEATURE_LIMIT,
) -> Attribution:
    """Exact Shapley values over all 2^n coalitions."""
    n = vf.n
    if n > limit:
        raise CapacityError(
            f"exact enumeration over {n} features needs 2^{n} = {1 << n} "
            f"evaluations; limit is {limit} features"
        )
    cache = cache if cache is not None else EvalCache()
    values = _all_values(vf, cache)
    sizes = _popcounts(n)
    w = subset_weights(n)
    masks = np.arange(1 << n, dtype=np.int64)
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = np.sum(w[sizes[without]] * (values[without | bit] - values[without]))
    return Attribution(phi, "shapley_exact", cache.stats())


def permutation_shapley(
    vf: ValueFunction,
    samples: int,
    seed: int = 0,
    cache: Optional[EvalCache] = None,
) -> Attribution:
    """Monte Carlo estimate: average marginals over sampled permutations.

    Efficiency holds exactly for each sampled permutation, hence for the
    average as well.  A fixed seed reproduces the output bit for bit.
    """
    if samples < 1:
        raise InvalidInputError(f"samples must be positive, got {samples}")
    n = vf.n
    cache = cache if cache is not None else EvalCache()
    rng = np.random.default_rng(seed)
    phi = np.zeros(n)
    for _ in range(samples):
        order = rng.permutation(n)
        mask = 0
        prev = cached_evaluate(vf, cache, 0)
        for i in order:
            mask |= 1 << int(i)
            cur = cached_evaluate(vf, cache, mask)
            phi[i] += cur - prev
            prev = cur
    phi /= samples
    return Attribution(phi, "shapley_mc", cache.stats())


def permutation_oracle_shapley(
    vf: ValueFunction, cache: Optional[EvalCache] = None
) -> Attribution:
    """Brute-force oracle: mean marginal over all n! permutations.

    Deliberately enumerates permutations rather than subsets so that it
    shares no code path with exact_shapley.
    """
    n = vf.n
    if n > ORACLE_FEATURE_LIMIT:
        raise CapacityError(
            f"permutation oracle enumerates {n}! orderings; limit is "
            f"{ORACLE_FEATURE_LIMIT} features"
        )
    cache = cache if cache is not None else EvalCache()
    import itertools

    phi = np.zeros(n)
    count = 0
    for order in itertools.permutations(range(n)):
        mask = 0
        prev = cached_evaluate(vf, cache, 0)
        for i in order:
            mask |= 1 << i
            cur = cached_evaluate(vf, cache, mask)
            phi[i] += cur - prev
            prev = cur
        count += 1
    phi /= count
    return Attribution(phi, "shapley_exact", cache.stats())
