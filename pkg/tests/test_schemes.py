"""Selection schemes: estimation model, the five selectors, and the brute-force
cross-check for the ideal selector."""
import math

import numpy as np
import pytest

from relevance_sim import (
    EstimationModel,
    SelectionContext,
    estimate_receiver_known,
    estimation_error,
    exhaustive_best_selection,
    oracle_mismatch_count,
    sample_estimated_value,
    select_baseline,
    select_ideal_semantic,
    select_irc,
    select_rm,
    select_semantic,
)
from relevance_sim.schemes import random_selection_instance

MODEL = EstimationModel()


def _ctx(local, gamma, est_known=frozenset(), values=None, known_size=None,
         receivers=(1,), true_known=None, s_min=0.05):
    if values is None:
        values = {r: [0.0] * 40 for r in receivers}
    return SelectionContext(
        transmitter=0,
        local_set=set(local),
        known_set_size=len(local) if known_size is None else known_size,
        estimated_receiver_known=set(est_known),
        receivers=tuple(receivers),
        gamma=gamma,
        s_min=s_min,
        receiver_values=values,
        true_receiver_known=true_known,
    )


# --- estimation model -------------------------------------------------------

def test_estimation_error_reference_points():
    assert estimation_error(26, MODEL) == pytest.approx(0.5)
    assert estimation_error(0, MODEL) == pytest.approx(0.9999977, abs=1e-6)
    assert estimation_error(40, MODEL) == pytest.approx(0.000911, abs=1e-5)


def test_estimation_error_strictly_decreasing():
    eps = [estimation_error(c, MODEL) for c in range(0, 60)]
    assert all(a > b for a, b in zip(eps, eps[1:]))
    assert all(0.0 < e < 1.0 for e in eps)


def test_estimated_value_zero_error_is_identity():
    rng = np.random.default_rng(1)
    for w in (0.0, 0.05, 0.31, 1.0):
        assert sample_estimated_value(w, 0.0, MODEL, rng) == w


def test_estimated_value_contained_and_centred():
    rng = np.random.default_rng(2)
    for w, eps in ((0.7, 0.4), (0.2, 1.0), (0.0, 1.0), (1.0, 0.3)):
        half = MODEL.value_range_width * eps / 2
        draws = np.array([sample_estimated_value(w, eps, MODEL, rng) for _ in range(4000)])
        assert draws.min() >= w - half
        assert draws.max() <= w + half
        # Centred on the true value: the interval is not folded back into
        # [0, 1], so the sample mean stays at w even at the range edges.
        assert abs(draws.mean() - w) < 4 * (half / math.sqrt(3 * len(draws)))


def test_estimated_value_uniform_on_interval():
    # true 0.7, eps 0.4 -> uniform on [0.5, 0.9]; one-sample KS check.
    rng = np.random.default_rng(3)
    n = 10_000
    draws = np.sort([sample_estimated_value(0.7, 0.4, MODEL, rng) for _ in range(n)])
    cdf = (draws - 0.5) / 0.4
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    d_stat = max(np.max(ecdf_hi - cdf), np.max(cdf - ecdf_lo))
    assert d_stat < 1.63 / math.sqrt(n)  # alpha = 0.01 critical value


# --- channel-derived receiver-knowledge estimate ----------------------------

def test_estimate_receiver_known_union_and_expiry():
    assert estimate_receiver_known([], current_slot=5, n_vehicles=2) == set()
    history = [((1, 2), 4), ((2, 3), 5)]
    assert estimate_receiver_known(history, current_slot=5, n_vehicles=2) == {1, 2, 3}
    # First entry is now a full cycle old: only the second survives.
    assert estimate_receiver_known(history, current_slot=6, n_vehicles=2) == {2, 3}


# --- content-agnostic selectors ---------------------------------------------

def test_baseline_under_budget_sends_everything():
    rng = np.random.default_rng(4)
    assert select_baseline(_ctx({3, 7, 9}, gamma=5), rng) == {3, 7, 9}
    assert select_baseline(_ctx(set(), gamma=5), rng) == set()


def test_baseline_over_budget_uniform_subset():
    local = set(range(10))
    rng = np.random.default_rng(5)
    counts = {k: 0 for k in local}
    for _ in range(10_000):
        out = select_baseline(_ctx(local, gamma=4), rng)
        assert len(out) == 4 and out <= local
        for k in out:
            counts[k] += 1
    # Each element is kept with probability gamma/|local| = 0.4.
    for k, c in counts.items():
        assert abs(c / 10_000 - 0.4) < 0.03


def test_irc_removes_redundant_only_while_over_budget():
    local, red = {0, 1, 2, 3}, {1, 3}
    rng = np.random.default_rng(6)
    saw = set()
    for _ in range(200):
        out = select_irc(_ctx(local, gamma=3, est_known=red), rng)
        assert len(out) == 3 and {0, 2} <= out
        saw |= out & red
    assert saw == red  # removal among redundant ids is randomised
    assert select_irc(_ctx(local, gamma=2, est_known=red), rng) == {0, 2}
    assert select_irc(_ctx({0, 1}, gamma=5, est_known=red), rng) == {0, 1}


def test_irc_falls_back_to_non_redundant_subset():
    # Dropping every redundant id still leaves too much: random budget-sized
    # subset of the non-redundant remainder.
    local = set(range(8))
    red = {6, 7}
    rng = np.random.default_rng(7)
    for _ in range(100):
        out = select_irc(_ctx(local, gamma=3, est_known=red), rng)
        assert len(out) == 3
        assert out <= local - red


def test_rm_drops_all_estimated_redundant():
    rng = np.random.default_rng(8)
    assert select_rm(_ctx({0, 1, 2, 3}, gamma=3, est_known={1, 3}), rng) == {0, 2}
    assert select_rm(_ctx({0, 1}, gamma=3, est_known={0, 1}), rng) == set()
    for _ in range(100):
        out = select_rm(_ctx(set(range(9)), gamma=2, est_known=set()), rng)
        assert len(out) == 2 and out <= set(range(9))


# --- semantic selector -------------------------------------------------------

def _values_for(receivers, table):
    # table: id -> per-receiver tuple (or scalar applied to all receivers)
    values = {r: [0.0] * 40 for r in receivers}
    for k, v in table.items():
        for i, r in enumerate(receivers):
            values[r][k] = v[i] if isinstance(v, tuple) else v
    return values


def test_semantic_selection_contract():
    rng = np.random.default_rng(9)
    local = set(range(12))
    for _ in range(1000):
        values = {1: rng.uniform(0.0, 1.0, 40).tolist()}
        ctx = _ctx(local, gamma=5, values=values, known_size=28)
        out = select_semantic(ctx, MODEL, rng)
        assert len(out) <= 5
        assert out <= local


def test_semantic_scores_redundant_as_zero():
    # Estimated-redundant ids can never outrank the threshold, whatever the noise.
    rng = np.random.default_rng(10)
    values = _values_for((1,), {k: 0.9 for k in range(6)})
    ctx = _ctx(set(range(6)), gamma=6, est_known={0, 1, 2, 3, 4, 5}, values=values)
    assert select_semantic(ctx, MODEL, rng) == set()


def test_semantic_zero_error_degenerates_to_ideal():
    rng = np.random.default_rng(11)
    values = _values_for((1, 2), {0: (0.9, 0.1), 1: (0.2, 0.7), 2: 0.04, 3: 0.6, 4: 0.0})
    est = {3}
    for gamma in (1, 2, 3):
        # known_set_size far beyond the logistic midpoint forces eps ~ 0.
        ctx = _ctx({0, 1, 2, 3, 4}, gamma=gamma, est_known=est, values=values,
                   known_size=500, receivers=(1, 2),
                   true_known={1: set(est), 2: set(est)})
        got = select_semantic(ctx, MODEL, rng)
        assert got == select_ideal_semantic(ctx)


def test_semantic_all_below_threshold_sends_nothing():
    rng = np.random.default_rng(12)
    values = _values_for((1,), {0: 0.04, 1: 0.01, 2: 0.0})
    ctx = _ctx({0, 1, 2}, gamma=3, values=values, known_size=500)
    assert select_semantic(ctx, MODEL, rng) == set()


def test_semantic_draw_order_matches_scalar_sampling():
    # The selector consumes exactly one uniform per (variable, receiver) pair,
    # variables in ascending id order, receivers in declared order; replaying
    # the same stream through sample_estimated_value must reproduce it.
    seed = 13
    local = {2, 5, 7, 11}
    receivers = (1, 3)
    rng = np.random.default_rng(seed)
    values = {r: rng.uniform(0.0, 1.0, 40).tolist() for r in receivers}
    ctx = _ctx(local, gamma=2, est_known={5}, values=values, known_size=20,
               receivers=receivers)
    got = select_semantic(ctx, MODEL, np.random.default_rng(seed + 1))

    replay = np.random.default_rng(seed + 1)
    eps = estimation_error(ctx.known_set_size, MODEL)
    scored = []
    for k in sorted(local - {5}):
        best = max(sample_estimated_value(values[r][k], eps, MODEL, replay)
                   for r in receivers)
        if best > ctx.s_min:
            scored.append((-best, k))
    expected = {k for _, k in sorted(scored)[:2]}
    assert got == expected


# --- ideal selector and its oracle -------------------------------------------

def test_ideal_picks_top_true_values():
    values = _values_for((1,), {0: 0.8, 1: 0.5, 2: 0.6, 3: 0.03})
    ctx = _ctx({0, 1, 2, 3}, gamma=2, values=values,
               true_known={1: {1}})  # id 1 redundant for the sole receiver
    assert select_ideal_semantic(ctx) == {0, 2}


def test_ideal_requires_true_knowledge():
    with pytest.raises(ValueError):
        select_ideal_semantic(_ctx({0}, gamma=1))


def test_ideal_empty_local_and_tie_break():
    values = _values_for((1,), {0: 0.9, 1: 0.9})
    assert select_ideal_semantic(_ctx(set(), gamma=2, values=values,
                                      true_known={1: set()})) == set()
    out = select_ideal_semantic(_ctx({0, 1}, gamma=1, values=values,
                                     true_known={1: set()}))
    assert out == {0}  # equal scores: lower id wins


def test_ideal_uses_best_value_over_receivers():
    # Known to receiver 1 but fresh and valuable to receiver 2: still selected.
    values = _values_for((1, 2), {0: (0.9, 0.8), 1: (0.3, 0.2)})
    ctx = _ctx({0, 1}, gamma=1, values=values, receivers=(1, 2),
               true_known={1: {0}, 2: set()})
    assert select_ideal_semantic(ctx) == {0}
    # Redundant for every receiver: worthless, never selected.
    ctx = _ctx({0, 1}, gamma=2, values=values, receivers=(1, 2),
               true_known={1: {0}, 2: {0}})
    assert select_ideal_semantic(ctx) == {1}


def test_exhaustive_reference_selector():
    scores = {4: 0.5, 9: 0.5, 2: 0.04, 7: 0.9}
    assert exhaustive_best_selection(scores, gamma=2, s_min=0.05) == {4, 7}
    assert exhaustive_best_selection(scores, gamma=1, s_min=0.05) == {7}
    # Ties prefer the lexicographically smallest id tuple.
    assert exhaustive_best_selection({1: 0.5, 2: 0.5}, gamma=1, s_min=0.05) == {1}
    assert exhaustive_best_selection({}, gamma=3, s_min=0.05) == set()


def test_ideal_matches_brute_force_on_random_instances():
    assert oracle_mismatch_count(instances=200, seed=5) == 0


# --- cross-cutting properties -------------------------------------------------

def _random_est_known(rng, ctx):
    n = int(rng.integers(0, 12))
    return set(rng.choice(30, size=n, replace=False).tolist())


def test_every_selector_respects_budget_and_locality():
    rng = np.random.default_rng(14)
    for _ in range(300):
        ctx = random_selection_instance(rng)
        ctx.estimated_receiver_known = _random_est_known(rng, ctx)
        outputs = [
            select_baseline(ctx, rng),
            select_irc(ctx, rng),
            select_rm(ctx, rng),
            select_semantic(ctx, MODEL, rng),
            select_ideal_semantic(ctx),
        ]
        for out in outputs:
            assert len(out) <= ctx.gamma
            assert out <= ctx.local_set
        # The redundancy-mitigation output shares nothing with the estimate.
        assert outputs[2].isdisjoint(ctx.estimated_receiver_known)


def test_selectors_are_pure_given_stream_state():
    rng_a = np.random.default_rng(15)
    rng_b = np.random.default_rng(15)
    ctx = random_selection_instance(np.random.default_rng(16))
    ctx.estimated_receiver_known = {1, 4}
    for select in (select_baseline, select_irc, select_rm):
        assert select(ctx, rng_a) == select(ctx, rng_b)
    assert select_semantic(ctx, MODEL, rng_a) == select_semantic(ctx, MODEL, rng_b)


def test_context_validation():
    with pytest.raises(ValueError):
        _ctx({1}, gamma=0).validate()
    ctx = _ctx({1}, gamma=1)
    ctx.receivers = ()
    with pytest.raises(ValueError):
        ctx.validate()
    ctx = _ctx({1}, gamma=1, receivers=(0, 1))
    with pytest.raises(ValueError):
        ctx.validate()
