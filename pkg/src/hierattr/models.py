"""Synthetic games and toy image scorers used as ground-truth fixtures."""

from __future__ import annotations

import json
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .games import (
    ValueFunction,
    full_mask,
    mask_from_indices,
    mask_to_bool,
    masks_to_bool,
    popcount,
)

GAME_KINDS = ("additive", "unanimity", "majority", "cross-group-interaction", "random-seeded")


def _table_game(table: np.ndarray, n: int) -> ValueFunction:
    table = np.asarray(table, dtype=float)
    return ValueFunction(n, lambda m: table[m], lambda ms: table[np.fromiter(ms, dtype=np.int64)])


def make_synthetic_game(kind: str, params: dict, seed: Optional[int] = None) -> ValueFunction:
    """Build a deterministic test game with a known attribution solution.

    Kinds and closed forms:

    * ``additive`` (``weights``): v(S) = sum of weights in S, Shapley = weights.
    * ``unanimity`` (``n``, ``members``): v(S) = 1 iff members ⊆ S; each
      member gets 1/|members|, everyone else 0.
    * ``majority`` (``n``, optional ``quota``): v(S) = 1 iff |S| ≥ quota;
      symmetric, so every feature gets 1/n.
    * ``cross-group-interaction`` (``n``, ``groups``, optional ``weights``):
      a weighted sum of unanimity games, one per group.
    * ``random-seeded`` (``n``): v(S) ~ uniform[-1, 1] per mask with
      v(∅) = 0, drawn from ``seed``.
    """
    if kind == "additive":
        weights = np.asarray(params["weights"], dtype=float)
        if weights.size < 1:
            raise InvalidInputError("additive game needs at least one weight")
        n = weights.size
        return ValueFunction(
            n,
            lambda m: float(weights[mask_to_bool(m, n)].sum()),
            lambda ms: masks_to_bool(ms, n).astype(float) @ weights,
        )

    if kind == "unanimity":
        n = int(params["n"])
        members = mask_from_indices(params["members"], n)
        if members == 0:
            raise InvalidInputError("unanimity game needs a nonempty member set")
        return ValueFunction(n, lambda m: 1.0 if (m & members) == members else 0.0)

    if kind == "majority":
        n = int(params["n"])
        quota = int(params.get("quota", n // 2 + 1))
        if not 1 <= quota <= n:
            raise InvalidInputError(f"quota {quota} out of range for n={n}")
        return ValueFunction(n, lambda m: 1.0 if popcount(m) >= quota else 0.0)

    if kind == "cross-group-interaction":
        n = int(params["n"])
        groups = [mask_from_indices(g, n) for g in params["groups"]]
        weights = [float(w) for w in params.get("weights", [1.0] * len(groups))]
        if len(weights) != len(groups):
            raise InvalidInputError("one weight per group required")

        def fn(m, groups=groups, weights=weights):
            return sum(w for g, w in zip(groups, weights) if (m & g) == g)

        return ValueFunction(n, fn)

    if kind == "random-seeded":
        n = int(params["n"])
        rng = np.random.default_rng(seed)
        table = rng.uniform(-1.0, 1.0, size=1 << n)
        table[0] = 0.0
        return _table_game(table, n)

    raise InvalidInputError(f"unknown game kind {kind!r}; expected one of {GAME_KINDS}")


def closed_form_shapley(kind: str, params: dict) -> np.ndarray:
    """Documented exact Shapley solution for the deterministic game kinds."""
    if kind == "additive":
        return np.asarray(params["weights"], dtype=float)
    if kind == "unanimity":
        n = int(params["n"])
        members = set(params["members"])
        return np.array([1.0 / len(members) if i in members else 0.0 for i in range(n)])
    if kind == "majority":
        n = int(params["n"])
        return np.full(n, 1.0 / n)
    if kind == "cross-group-interaction":
        n = int(params["n"])
        groups = params["groups"]
        weights = params.get("weights", [1.0] * len(groups))
        phi = np.zeros(n)
        for g, w in zip(groups, weights):
            for i in g:
                phi[i] += w / len(g)
        return phi
    raise InvalidInputError(f"no closed form for game kind {kind!r}")


def random_game(n: int, seed: int) -> ValueFunction:
    """Shorthand for the seeded uniform[-1, 1] table game with v(∅) = 0."""
    return make_synthetic_game("random-seeded", {"n": n}, seed=seed)


# --- toy image scorers ---------------------------------------------------
# Scorers accept an (H, W) image or a (B, H, W) batch and return a scalar
# or a (B,) vector accordingly.


def pixel_sum_scorer(weights: Optional[np.ndarray] = None):
    """Weighted pixel sum; with zero baseline this is an additive game."""
    if weights is None:
        def score(img):
            img = np.asarray(img, dtype=float)
            return img.sum(axis=(-2, -1))
        return score

    w = np.asarray(weights, dtype=float)

    def score(img):
        img = np.asarray(img, dtype=float)
        return (img * w).sum(axis=(-2, -1))

    return score


def template_mean_scorer(region: Optional[np.ndarray] = None):
    """Mean intensity over ``region`` (a boolean mask), or the whole image."""
    if region is None:
        def score(img):
            img = np.asarray(img, dtype=float)
            return img.mean(axis=(-2, -1))
        return score

    region = np.asarray(region, dtype=bool)

    def score(img):
        img = np.asarray(img, dtype=float)
        return img[..., region].mean(axis=-1)

    return score


def make_group_and_scorer(regions: Sequence[np.ndarray], threshold: float = 0.0):
    """Score = number of regions whose pixels are all above ``threshold``.

    Each region only fires when every one of its pixels survives masking,
    so strict sub-coalitions of a region carry no marginal effect for its
    members: the classic group-level redundancy that plain per-feature
    dummy reasoning mislabels.
    """
    region_masks = [np.asarray(r, dtype=bool) for r in regions]
    if not region_masks:
        raise InvalidInputError("at least one region required")
    union = np.zeros_like(region_masks[0], dtype=int)
    for r in region_masks:
        if r.shape != region_masks[0].shape:
            raise InvalidInputError("regions must share one shape")
        union += r.astype(int)
    if union.max() > 1:
        raise InvalidInputError("regions must be disjoint")

    def score(img):
        img = np.asarray(img, dtype=float)
        total = 0.0 if img.ndim == 2 else np.zeros(img.shape[0])
        for r in region_masks:
            total = total + np.all(img[..., r] > threshold, axis=-1)
        return total

    return score


def load_fixture(spec: dict, seed: Optional[int] = None):
    """Instantiate a game or scorer from its JSON fixture description.

    Game fixtures: ``{"kind": <game kind>, "params": {...}}``.
    Scorer fixtures: ``{"kind": "pixel-sum" | "template-mean" | "group-and",
    "params": {...}}`` where region-like params are nested lists.
    """
    kind = spec.get("kind")
    params = spec.get("params", {})
    if kind in GAME_KINDS:
        return make_synthetic_game(kind, params, seed=seed)
    if kind == "pixel-sum":
        w = params.get("weights")
        return pixel_sum_scorer(None if w is None else np.asarray(w, dtype=float))
    if kind == "template-mean":
        r = params.get("region")
        return template_mean_scorer(None if r is None else np.asarray(r, dtype=bool))
    if kind == "group-and":
        regions = [np.asarray(r, dtype=bool) for r in params["regions"]]
        return make_group_and_scorer(regions, float(params.get("threshold", 0.0)))
    raise InvalidInputError(f"unknown fixture kind {kind!r}")


def load_fixture_file(path, seed: Optional[int] = None):
    with open(path) as fh:
        return load_fixture(json.load(fh), seed=seed)
