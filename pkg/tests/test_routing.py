import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from antnet.routing import (
    AntNetParams,
    PheromoneTable,
    RoutingError,
    TrafficStats,
    compute_reinforcement,
    init_uniform,
    remove_neighbor,
    row_is_normalized,
    select_next_hop,
    update_pheromone,
    update_traffic_stats,
)


def stats_from(observations, params):
    s = TrafficStats()
    for x in observations:
        s = update_traffic_stats(s, x, params)
    return s


# -- init_uniform -----------------------------------------------------------


def test_init_two_neighbors():
    table = init_uniform(0, {1, 2}, {1, 2, 3})
    assert all(row == {1: 0.5, 2: 0.5} for row in table.rows.values())


def test_init_single_neighbor():
    table = init_uniform(0, {7}, {7, 8})
    assert table.rows == {7: {7: 1.0}, 8: {7: 1.0}}


def test_init_four_by_ten():
    table = init_uniform(0, {1, 2, 3, 4}, set(range(1, 11)))
    assert len(table.rows) == 10
    assert all(math.isclose(sum(r.values()), 1.0) for r in table.rows.values())


def test_init_errors():
    with pytest.raises(RoutingError):
        init_uniform(0, set(), {1})
    with pytest.raises(RoutingError):
        init_uniform(0, {1}, {0, 1})


# -- select_next_hop --------------------------------------------------------


def test_select_single_neighbor(rng):
    assert all(select_next_hop({4: 1.0}, set(), rng) == 4 for _ in range(100))


def test_select_uniform_fallback_when_all_visited(rng):
    row = {1: 0.8, 2: 0.15, 3: 0.05}
    n = 30_000
    counts = {1: 0, 2: 0, 3: 0}
    for _ in range(n):
        counts[select_next_hop(row, {1, 2, 3}, rng)] += 1
    for k in counts:
        assert abs(counts[k] / n - 1 / 3) <= 0.02


def test_select_proportional(rng):
    row = {10: 0.7, 11: 0.3}
    n = 30_000
    hits = sum(select_next_hop(row, set(), rng) == 10 for _ in range(n))
    assert abs(hits / n - 0.7) <= 0.02
    assert abs((n - hits) / n - 0.3) <= 0.02


def test_select_renormalizes_over_unvisited(rng):
    row = {1: 0.5, 2: 0.3, 3: 0.2}
    n = 30_000
    hits = sum(select_next_hop(row, {1}, rng) == 2 for _ in range(n))
    assert abs(hits / n - 0.6) <= 0.02


def test_select_explore_share(rng):
    # explore=0.5 over {1: 0.9, 2: 0.1}: P(2) = 0.5 * 0.1 + 0.5 * 0.5
    row = {1: 0.9, 2: 0.1}
    n = 30_000
    hits = sum(select_next_hop(row, set(), rng, explore=0.5) == 2 for _ in range(n))
    assert abs(hits / n - 0.3) <= 0.02


def test_select_explore_skips_visited(rng):
    row = {1: 0.98, 2: 0.01, 3: 0.01}
    assert all(select_next_hop(row, {1}, rng, explore=0.99) in (2, 3) for _ in range(2000))


def test_select_empty_row(rng):
    with pytest.raises(RoutingError):
        select_next_hop({}, set(), rng)


def test_select_is_seed_deterministic():
    row = {3: 0.2, 1: 0.5, 2: 0.3}
    a = [select_next_hop(row, set(), random.Random(9)) for _ in range(5)]
    b = [select_next_hop(row, set(), random.Random(9)) for _ in range(5)]
    assert a == b


@given(
    st.dictionaries(st.integers(0, 20), st.floats(0.01, 1.0), min_size=1, max_size=6),
    st.data(),
    st.integers(0, 2**32),
)
def test_select_stays_in_row_and_avoids_visited(raw, data, seed):
    total = sum(raw.values())
    row = {k: v / total for k, v in raw.items()}
    keys = sorted(row)
    visited = set(data.draw(st.lists(st.sampled_from(keys), max_size=len(keys) - 1)))
    choice = select_next_hop(row, visited, random.Random(seed))
    assert choice in row
    assert choice not in visited


# -- update_pheromone -------------------------------------------------------


def test_update_hand_value():
    out = update_pheromone({1: 0.5, 2: 0.5}, 1, 0.2)
    assert out[1] == pytest.approx(0.6, abs=1e-15)
    assert out[2] == pytest.approx(0.4, abs=1e-15)


def test_update_identity_and_saturation():
    row = {1: 0.2, 2: 0.3, 3: 0.5}
    assert update_pheromone(row, 2, 0.0) == row
    assert update_pheromone(row, 2, 1.0) == {1: 0.0, 2: 1.0, 3: 0.0}


def test_update_errors():
    with pytest.raises(RoutingError):
        update_pheromone({1: 1.0}, 2, 0.1)
    with pytest.raises(RoutingError):
        update_pheromone({1: 1.0}, 1, 1.5)
    with pytest.raises(RoutingError):
        update_pheromone({1: 1.0}, 1, -0.1)


@given(st.integers(2, 6), st.floats(1e-9, 1.0), st.data())
def test_update_monotone(n, r, data):
    row = {k: 1.0 / n for k in range(n)}
    target = data.draw(st.integers(0, n - 1))
    out = update_pheromone(row, target, r)
    assert out[target] > row[target]
    for k in row:
        if k != target:
            assert out[k] < row[k]


@pytest.mark.parametrize("r", [0.05, 0.3, 0.9])
@pytest.mark.parametrize("eps", [1e-1, 1e-3, 1e-6])
def test_argmax_convergence_bound(r, eps):
    steps = math.ceil(math.log(eps) / math.log(1 - r))
    row = {0: 0.25, 1: 0.25, 2: 0.25, 3: 0.25}
    for _ in range(steps):
        row = update_pheromone(row, 2, r)
    assert row[2] > 1 - eps


def test_remove_neighbor_redistributes_proportionally():
    out = remove_neighbor({1: 0.5, 2: 0.3, 3: 0.2}, 1)
    assert out == pytest.approx({2: 0.6, 3: 0.4})
    assert remove_neighbor({1: 1.0}, 1) == {}
    assert remove_neighbor({1: 1.0, 2: 0.0, 3: 0.0}, 1) == {2: 0.5, 3: 0.5}


def test_table_drop_node():
    table = init_uniform(0, {1, 2}, {1, 2, 3})
    table.drop_node(1)
    assert set(table.rows) == {2, 3}
    assert all(row == {2: 1.0} for row in table.rows.values())
    table.drop_node(2)
    assert table.rows == {}


# -- traffic statistics -----------------------------------------------------


def test_stats_hand_values():
    params = AntNetParams(eta=0.1)
    s = TrafficStats(mean=10.0, variance=4.0, best_time=10.0, window=(10.0,), observation_count=1)
    out = update_traffic_stats(s, 20.0, params)
    assert out.mean == pytest.approx(11.0, abs=1e-12)
    assert out.variance == pytest.approx(13.6, abs=1e-12)


def test_stats_zero_innovation():
    params = AntNetParams(eta=0.25)
    s = TrafficStats(mean=5.0, variance=2.0, best_time=5.0, window=(5.0,), observation_count=3)
    out = update_traffic_stats(s, 5.0, params)
    assert out.mean == 5.0
    assert out.variance == pytest.approx(0.75 * 2.0)


def test_stats_window_eviction():
    params = AntNetParams(window=3)
    s = TrafficStats(mean=5.0, variance=1.0, best_time=3.0, window=(5.0, 7.0, 3.0), observation_count=3)
    out = update_traffic_stats(s, 4.0, params)
    assert out.window == (7.0, 3.0, 4.0)
    assert out.best_time == 3.0


def test_stats_first_observation_seeds_mean():
    out = update_traffic_stats(TrafficStats(), 2.5, AntNetParams())
    assert (out.mean, out.variance, out.best_time, out.observation_count) == (2.5, 0.0, 2.5, 1)


def test_stats_rejects_non_positive():
    with pytest.raises(RoutingError):
        update_traffic_stats(TrafficStats(), 0.0, AntNetParams())


@given(st.lists(st.floats(1e-4, 10.0), min_size=1, max_size=120), st.integers(1, 20))
def test_best_time_is_window_minimum(obs, w):
    s = stats_from(obs, AntNetParams(window=w))
    assert s.window == tuple(obs[-w:])
    assert s.best_time == min(obs[-w:])
    assert s.variance >= 0


# -- reinforcement ----------------------------------------------------------


def test_simple_reinforcement_examples():
    params = AntNetParams(r_min=0.05, r_max=1.0)
    s = stats_from([2.0, 3.0, 4.0], params)
    assert compute_reinforcement(2.0, s, params) == 1.0
    assert compute_reinforcement(4.0, s, params) == pytest.approx(0.5)
    assert compute_reinforcement(1e9, s, params) == 0.05
    capped = AntNetParams(r_min=0.05, r_max=0.4)
    assert compute_reinforcement(2.0, s, capped) == 0.4


def test_reinforcement_without_observations():
    assert compute_reinforcement(1.0, TrafficStats(), AntNetParams()) == AntNetParams().r_min


def test_reinforcement_errors():
    with pytest.raises(RoutingError):
        compute_reinforcement(0.0, stats_from([1.0], AntNetParams()), AntNetParams())


def test_full_mode_hand_value():
    params = AntNetParams(mode="full", c1=0.7, c2=0.3, z=2.0, window=4, r_min=0.01, r_max=1.0)
    s = TrafficStats(mean=3.0, variance=4.0, best_time=2.0, window=(2.0, 3.0), observation_count=2)
    # i_sup = 3 + 2*sqrt(4/4) = 5, spread = 3; T = 4 -> 0.7*0.5 + 0.3*3/(3+2)
    assert compute_reinforcement(4.0, s, params) == pytest.approx(0.35 + 0.18)
    assert compute_reinforcement(2.0, s, params) == pytest.approx(1.0)


def test_full_mode_drops_degenerate_term():
    params = AntNetParams(mode="full", c1=0.7, c2=0.3, r_min=0.01, r_max=1.0)
    s = TrafficStats(mean=1.0, variance=0.0, best_time=2.0, window=(2.0,), observation_count=5)
    assert compute_reinforcement(4.0, s, params) == pytest.approx(0.35)


@given(
    st.lists(st.floats(1e-3, 5.0), min_size=1, max_size=60),
    st.sampled_from(["simple", "full"]),
    st.floats(1.0, 50.0),
    st.floats(1.0, 50.0),
)
@settings(max_examples=200)
def test_reinforcement_non_increasing(obs, mode, f1, f2):
    params = AntNetParams(mode=mode, r_min=0.01, r_max=1.0, window=16)
    s = stats_from(obs, params)
    lo, hi = sorted((s.best_time * f1, s.best_time * f2))
    r_lo = compute_reinforcement(lo, s, params)
    r_hi = compute_reinforcement(hi, s, params)
    assert params.r_min <= r_hi <= r_lo + 1e-12 <= params.r_max + 1e-12


def test_params_validation():
    for bad in (dict(eta=0), dict(eta=1.5), dict(window=0), dict(c1=0.8, c2=0.3), dict(r_min=0),
                dict(r_min=0.5, r_max=0.4), dict(r_max=1.2), dict(mode="fancy"), dict(launch_interval=0), dict(explore=1.0), dict(explore=-0.1)):
        with pytest.raises(RoutingError):
            AntNetParams(**bad)


def test_normalization_under_random_updates(rng):
    row = {k: 0.25 for k in range(4)}
    for _ in range(10_000):
        row = update_pheromone(row, rng.randrange(4), rng.random())
        assert row_is_normalized(row)


def test_pheromone_table_row_lookup():
    table = PheromoneTable(0, {1: {1: 1.0}})
    assert table.row(1) == {1: 1.0}
    assert table.row(5) is None
