"""Exact, sampled, and oracle Shapley attribution."""

import numpy as np
import pytest

from hierattr import (
    CapacityError,
    EvalCache,
    InvalidInputError,
    ValueFunction,
    exact_shapley,
    full_mask,
    make_synthetic_game,
    permutation_oracle_shapley,
    permutation_shapley,
    popcount,
    random_game,
    subset_weights,
)


def test_subset_weights_sum_to_one_over_strata():
    # summed over all subsets of N \ {i}, the kernel integrates to 1
    import math

    for n in range(1, 12):
        w = subset_weights(n)
        total = sum(math.comb(n - 1, s) * w[s] for s in range(n))
        assert abs(total - 1.0) < 1e-12


def test_two_player_hand_case():
    table = {0: 0.0, 1: 1.0, 2: 2.0, 3: 4.0}
    vf = ValueFunction(2, lambda m: table[m])
    phi = exact_shapley(vf).scores
    assert np.allclose(phi, [1.5, 2.5])


def test_additive_game_recovers_weights():
    w = [1.0, -2.0, 3.5, 0.0, 0.25]
    g = make_synthetic_game("additive", {"weights": w})
    assert np.allclose(exact_shapley(g).scores, w, atol=1e-12)


def test_dummy_feature_scores_zero():
    # feature 2 never changes the value
    vf = ValueFunction(3, lambda m: float(popcount(m & 0b011)) ** 2)
    phi = exact_shapley(vf).scores
    assert abs(phi[2]) < 1e-12


def test_symmetric_game_equal_scores():
    vf = ValueFunction(4, lambda m: float(popcount(m)) ** 1.5)
    phi = exact_shapley(vf).scores
    assert np.allclose(phi, phi[0])


def test_constant_game_all_zero():
    vf = ValueFunction(5, lambda m: 3.0)
    assert np.allclose(exact_shapley(vf).scores, 0.0, atol=1e-12)


def test_efficiency_on_random_games():
    for seed in range(30):
        n = 3 + seed % 10
        g = random_game(n, seed)
        phi = exact_shapley(g).scores
        assert abs(phi.sum() - (g(full_mask(n)) - g(0))) < 1e-9


def test_linearity():
    rng = np.random.default_rng(2)
    f = random_game(6, 10)
    g = random_game(6, 11)
    a, b = 2.5, -0.75
    combo = ValueFunction(6, lambda m: a * f(m) + b * g(m))
    lhs = exact_shapley(combo).scores
    rhs = a * exact_shapley(f).scores + b * exact_shapley(g).scores
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_exact_count_is_two_to_the_n():
    for n in (3, 6, 9):
        cache = EvalCache()
        exact_shapley(random_game(n, 0), cache=cache)
        assert cache.distinct_calls == 1 << n


def test_capacity_limit():
    vf = ValueFunction(30, lambda m: 0.0)
    with pytest.raises(CapacityError):
        exact_shapley(vf)


def test_oracle_matches_exact():
    for seed in range(25):
        g = random_game(5, 100 + seed)
        a = exact_shapley(g).scores
        b = permutation_oracle_shapley(g).scores
        assert np.abs(a - b).max() < 1e-9


def test_oracle_capacity():
    with pytest.raises(CapacityError):
        permutation_oracle_shapley(ValueFunction(9, lambda m: 0.0))


def test_mc_additive_one_sample_exact():
    g = make_synthetic_game("additive", {"weights": [3.0, -1.0, 2.0]})
    phi = permutation_shapley(g, samples=1, seed=99).scores
    assert np.allclose(phi, [3.0, -1.0, 2.0], atol=1e-12)


def test_mc_converges_and_is_deterministic():
    table = {0: 0.0, 1: 1.0, 2: 2.0, 3: 4.0}
    vf = ValueFunction(2, lambda m: table[m])
    est = permutation_shapley(vf, samples=10_000, seed=1).scores
    assert np.abs(est - [1.5, 2.5]).max() < 0.05
    again = permutation_shapley(vf, samples=10_000, seed=1).scores
    assert (est == again).all()


def test_mc_efficiency_exact_per_sample():
    g = random_game(7, 4)
    phi = permutation_shapley(g, samples=17, seed=3).scores
    assert abs(phi.sum() - (g(full_mask(7)) - g(0))) < 1e-9


def test_mc_rejects_zero_samples():
    with pytest.raises(InvalidInputError):
        permutation_shapley(random_game(3, 0), samples=0)


def test_attribution_metadata():
    cache = EvalCache()
    att = exact_shapley(random_game(4, 0), cache=cache)
    assert att.method == "shapley_exact"
    assert att.eval_stats["distinct_calls"] == 16
    assert att.n == 4
