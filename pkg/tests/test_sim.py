import io
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchover.channel import ChannelParams
from switchover.mdp import all_stay_table, occupancy_from_table
from switchover.policies import FOUR_CORNER_TABLES, PolicySpec, TableController
from switchover.sim import (
    ArrivalSpec,
    ConfigError,
    ReplayController,
    SimConfig,
    cell_seed,
    classify_stability,
    config_from_mapping,
    csv_header,
    empirical_frequencies,
    run,
    run_saturated,
    sweep,
    write_csv,
)


def cfg(rates=(0.1, 0.1), policy="max_weight", e=0.25, **kw):
    return SimConfig(2, ChannelParams.symmetric(e), ArrivalSpec(rates), PolicySpec(policy), **kw)


def test_arrival_validation():
    with pytest.raises(ConfigError):
        ArrivalSpec((-0.1, 0.2))
    with pytest.raises(ConfigError):
        ArrivalSpec((1.5,))
    with pytest.raises(ConfigError):
        ArrivalSpec((0.1,), kind="uniform")
    assert ArrivalSpec((3.0,), kind="poisson").bound == 10
    a = ArrivalSpec((3.0,), kind="poisson", a_max=4).sample(10_000, np.random.default_rng(0))
    assert a.max() <= 4


def test_config_validation():
    with pytest.raises(ConfigError):
        run(cfg(rates=(0.1,)))
    with pytest.raises(ConfigError):
        run(cfg(frame_t=0))
    with pytest.raises(ConfigError):
        run(cfg(initial_m=3))
    with pytest.raises(ConfigError):
        run(SimConfig(3, ChannelParams.symmetric(0.25), ArrivalSpec((0.1,) * 3), PolicySpec("fbdc_table")))


def test_one_slot_queue_recursion():
    # Q = 3 at queue 1 with its channel ON: one departure then two arrivals
    c = cfg(rates=(0.0, 0.0), horizon=1, initial_q=(3, 0), initial_c=(1, 0), checkpoints=1)
    stats = run(c, TableController(all_stay_table(2)))
    assert stats.departures == (1, 0)
    assert stats.final_queue == (2, 0)
    arrivals = ArrivalSpec((1.0, 0.0))
    stats = run(replace(c, arrivals=arrivals), TableController(all_stay_table(2)))
    assert stats.final_queue == (3, 0)


def test_switch_serves_nothing():
    c = cfg(rates=(0.0, 0.0), horizon=1, initial_q=(3, 3), initial_c=(1, 1), checkpoints=1)
    stats = run(c, ReplayController([2]))
    assert stats.departures == (0, 0)


def test_empty_system():
    stats = run(cfg(rates=(0.0, 0.0), horizon=5000))
    assert stats.avg_total_queue == 0 and stats.avg_delay == 0
    assert stats.stable


def test_deterministic_given_seed():
    a = run(cfg(rates=(0.2, 0.2), horizon=5000, seed=4))
    b = run(cfg(rates=(0.2, 0.2), horizon=5000, seed=4))
    assert a.avg_total_queue == b.avg_total_queue and a.departures == b.departures
    c = run(cfg(rates=(0.2, 0.2), horizon=5000, seed=5))
    assert c.avg_total_queue != a.avg_total_queue


@pytest.mark.parametrize("policy", ["fbdc_lp", "fbdc_table", "myopic", "greedy_myopic", "max_weight", "gated", "exhaustive"])
def test_invariants_every_policy(policy):
    s = run(cfg(rates=(0.15, 0.15), policy=policy, horizon=20_000, frame_t=5, seed=1))
    assert sum(s.departures) <= s.on_slots_at_server
    assert s.empirical_x.sum() == pytest.approx(1.0)
    assert all(th <= 0.5 + 0.02 for th in s.throughput)


def test_saturated_all_stay():
    c = replace(cfg(), horizon=200_000, seed=2)
    r = run_saturated(c, TableController(all_stay_table(2)))
    assert r == pytest.approx((0.5, 0.0), abs=0.005)


def test_saturated_b1_corner():
    c = replace(cfg(e=0.4), horizon=200_000, seed=3)
    r = run_saturated(c, TableController(FOUR_CORNER_TABLES["b1"]))
    assert r == pytest.approx((0.20625, 0.34375), abs=0.005)


def test_saturated_greedy_three_queues():
    c = SimConfig(3, ChannelParams.symmetric(0.3), ArrivalSpec((0.0,) * 3), PolicySpec("greedy_myopic"),
                  horizon=300_000, seed=6)
    assert run_saturated(c).sum() == pytest.approx(0.65, abs=0.005)


def test_saturated_dominates_replayed_dynamic_run():
    c = cfg(rates=(0.2, 0.25), policy="max_weight", horizon=20_000, seed=8, record_trace=True)
    dyn = run(c)
    actions = dyn.trace % 2 + 1
    sat = run(replace(c, saturated=True), ReplayController(actions))
    assert all(d <= s for d, s in zip(dyn.departures, sat.departures))


def test_littles_law_consistency():
    s = run(cfg(rates=(0.2, 0.2), policy="fbdc_table", horizon=100_000, frame_t=5, seed=2))
    assert s.stable
    assert s.avg_delay * sum(s.throughput) == pytest.approx(s.avg_total_queue, rel=0.05)


def test_empirical_frequencies():
    assert empirical_frequencies([3, 3, 3, 3], 4, 16)[3] == 1.0
    with pytest.raises(ValueError):
        empirical_frequencies([1, 2], 0, 16)
    with pytest.raises(ValueError):
        empirical_frequencies([1, 2], 3, 16)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 15), min_size=1, max_size=200))
def test_empirical_mass_is_one(trace):
    assert empirical_frequencies(trace, len(trace), 16).sum() == pytest.approx(1.0, abs=1e-12)


def test_empirical_frequencies_approach_vertex():
    p = ChannelParams.symmetric(0.4)
    table = FOUR_CORNER_TABLES["b1"]
    c = replace(cfg(e=0.4), horizon=100_000, seed=5, saturated=True, record_trace=True)
    s = run(c, TableController(table))
    x = empirical_frequencies(s.trace, 100_000, 16)
    assert np.abs(x - occupancy_from_table(p, 2, table)).sum() <= 0.02


def test_classify_examples():
    const = [(t, 10) for t in range(500, 100_001, 500)]
    assert classify_stability(const, 100_000) == (True, 0.0)
    growing = [(t, 0.05 * t) for t in range(500, 100_001, 500)]
    stable, slope = classify_stability(growing, 100_000)
    assert not stable and slope == pytest.approx(0.05)


def test_sweep_rows_and_determinism():
    base = cfg(horizon=2000)
    rows = sweep([(0.1, 0.1), (0.2, 0.1)], base, replicates=2, master_seed=3)
    assert len(rows) == 4
    assert [r[0].arrivals.rates for r in rows] == [(0.1, 0.1)] * 2 + [(0.2, 0.1)] * 2
    assert rows[0][0].seed == cell_seed(3, 0) != rows[1][0].seed
    again = sweep([(0.1, 0.1), (0.2, 0.1)], base, replicates=2, master_seed=3)
    assert write_csv(rows, 2) == write_csv(again, 2)


def test_sweep_parallel_matches_serial():
    base = cfg(horizon=2000)
    grid = [(0.1, 0.1), (0.2, 0.1), (0.1, 0.3)]
    assert write_csv(sweep(grid, base, jobs=1), 2) == write_csv(sweep(grid, base, jobs=2), 2)


def test_csv_header_and_empty_grid():
    assert csv_header(2) == ["lambda_1", "lambda_2", "policy", "k", "T", "seed", "Ts",
                             "avg_total_queue", "avg_delay", "thr_1", "thr_2", "stable", "slope"]
    buf = io.StringIO()
    write_csv([], 2, buf)
    assert buf.getvalue().strip() == ",".join(csv_header(2))


def test_config_from_mapping():
    c = config_from_mapping({"n": 2, "epsilon": 0.4, "arrivals.kind": "bernoulli", "arrivals.rates": [0.1, 0.2],
                             "policy": {"kind": "olm", "k": 1}, "frame_t": 5, "horizon": 1000, "seed": 9})
    assert c.channel == ChannelParams.symmetric(0.4)
    assert c.arrivals.rates == (0.1, 0.2) and c.policy.kind == "myopic" and c.frame_t == 5
    c = config_from_mapping({"n": 2, "p01": 0.2, "p10": 0.1, "arrivals.rates": [0.1, 0.2], "policy.kind": "mw"})
    assert c.channel == ChannelParams(0.2, 0.1)
    with pytest.raises(ConfigError):
        config_from_mapping({"n": 2, "epsilon": 0.4, "p01": 0.2, "arrivals.rates": [0.1, 0.2], "policy.kind": "mw"})
    with pytest.raises(ConfigError):
        config_from_mapping({"n": 2, "arrivals.rates": [0.1, 0.2], "policy.kind": "mw"})
