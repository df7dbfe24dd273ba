import itertools
import math

import numpy as np
import pytest

from coopsense import fixtures as fx
from coopsense.detection import PU_ABSENT, PdMatrix
from coopsense.simulator import (MODELS, BufferState, Observation, ScenarioConfig, SimState,
                                 Streams, allocate_jsrm, allocate_jsrr, build_sensing_map,
                                 capacity_mbps, largest_remainder, observe, play_slot,
                                 resolve_contention, run_models, run_simulation, update_bids)

SMALL = ScenarioConfig(n_slots=150, seed=4)


@pytest.fixture(scope="module")
def small_runs():
    return run_models(SMALL)


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        ScenarioConfig(snr_low_db=-5, snr_high_db=-25)
    with pytest.raises(ValueError):
        ScenarioConfig(n_slots=0)
    with pytest.raises(ValueError):
        ScenarioConfig(model="aloha")
    cfg = ScenarioConfig(seed=9, sensing_prefs=(1, 2, 3))
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    assert ScenarioConfig().prefs == (5, 5, 5)


def test_sensing_map_row_sums():
    m = build_sensing_map((1, 2, 2), 3, np.random.default_rng(0))
    assert m.sum(axis=1).tolist() == [1, 2, 2]
    assert build_sensing_map((4, 4), 4).all()
    with pytest.raises(ValueError):
        build_sensing_map((5,), 4)


def test_capacity_values():
    # closed form 7 * log2(1 + 10**-0.5)
    assert capacity_mbps(-5.0) == pytest.approx(7.0 * math.log2(1.0 + 10 ** -0.5), rel=1e-12)
    assert capacity_mbps(-5.0) == pytest.approx(2.7748, abs=1e-4)
    assert capacity_mbps(-300.0) == pytest.approx(0.0, abs=1e-12)


def test_update_bids_limits():
    cfg = ScenarioConfig()
    rng = np.random.default_rng(0)
    buf = BufferState(np.array([0.0, 50.0]))
    cfg0 = ScenarioConfig(bid_walk_sigma=1e-12)
    bids = update_bids(buf, [40.0, 60.0], rng, cfg0)
    assert bids[0] == pytest.approx(0.0, abs=1e-9) and bids[1] == pytest.approx(60.0)
    buf = BufferState(np.full(1, cfg.level_cap / 2))
    fractions = [update_bids(buf, [100.0], rng, cfg)[0] / 100.0 for _ in range(10_000)]
    assert 0.0 <= min(fractions) and max(fractions) <= 1.0 and np.var(fractions) > 0
    assert np.mean((np.array(fractions) > 0) & (np.array(fractions) < 1)) > 0.5


def test_streams_are_isolated():
    a = Streams(3)
    b = Streams(3)
    a["backoff_jspa"].random(1000)
    assert a["pu_activity"].random() == b["pu_activity"].random()
    assert Streams(3)["x"].random() != Streams(4)["x"].random()


def example_observation():
    return Observation(pu_present=np.array([False, True, False]), sensing_map=fx.SENSING_MAP,
                       pd=fx.example_pd_matrix(), local=np.where(fx.SENSING_MAP, -1, 1),
                       caps=fx.CAPS, decisions=fx.DECISIONS, bids=fx.BIDS)


def test_worked_example_end_to_end():
    cfg = ScenarioConfig(n_sus=3, n_channels=3)
    state = SimState.initial(cfg)
    fr, out = play_slot(state, example_observation(), cfg, None, ("cgjsja", "jsrm"))
    assert np.allclose(fr.wallets.values, fx.NUCLEOLUS_NORM, atol=0.02)
    m = out["cgjsja"]
    assert m.allocation == {0: 2, 2: 0}
    assert m.rates == pytest.approx(fx.RATES, abs=1e-4)
    assert np.allclose(fr.auction.balances, fx.BALANCES, atol=0.02)
    assert out["jsrm"].allocation == {0: 2, 2: 1}
    assert out["jsrm"].rates[1] == pytest.approx(0.4765, abs=1e-4)
    assert state.slot == 1 and state.prev_norm_balance is not None


def test_no_idle_channels_carries_wallets():
    cfg = ScenarioConfig(n_sus=3, n_channels=3)
    state = SimState.initial(cfg)
    obs = example_observation()
    obs.decisions = np.array([1, 1, 1])
    obs.bids = None
    fr, out = play_slot(state, obs, cfg, Streams(0), MODELS[:1] + ("jsrm", "jsrr"))
    for m in out.values():
        assert np.all(m.rates == 0)
    assert fr.auction.balances == pytest.approx(fr.wallets.values)


def test_one_su_wins_all_idle_channels():
    cfg = ScenarioConfig(n_sus=1, n_channels=5, n_slots=30, seed=2)
    res = run_simulation(cfg)
    for s in res.slots:
        if s.bids[0] > 0:
            assert s.channels_won[0] == s.idle_count


def test_allocators():
    assert allocate_jsrm([0, 2], fx.CAPS) == {0: 2, 2: 1}
    alloc, nxt = allocate_jsrr([0, 1, 2, 3], 3, 0)
    counts = np.bincount(list(alloc.values()), minlength=3)
    assert counts.max() <= 2 and nxt == 1
    assert largest_remainder([1, 1, 1], 4).sum() == 4
    assert largest_remainder([0, 0], 3).tolist() == [0, 0]
    assert largest_remainder([3, 1], 2).tolist() == [2, 0]


def test_resolve_contention():
    rng = np.random.default_rng(0)
    assert resolve_contention([2], rng) == (2, 1.0)
    outcomes = [resolve_contention([0, 1], rng) for _ in range(2000)]
    fractions = {f for _, f in outcomes}
    assert fractions <= {0.0, 0.75, 0.5, 0.25}
    assert any(w is None for w, _ in outcomes)


def test_jsrm_is_per_slot_maximum():
    # exhaustive oracle over every assignment of idle channels to SUs
    rng = np.random.default_rng(1)
    for _ in range(50):
        caps = rng.uniform(0, 3, size=(3, 5))
        idle = sorted(rng.choice(5, size=rng.integers(0, 6), replace=False).tolist())
        best = max((sum(caps[a, c] for a, c in zip(assign, idle))
                    for assign in itertools.product(range(3), repeat=len(idle))), default=0.0)
        jsrm = allocate_jsrm(idle, caps)
        assert sum(caps[s, c] for c, s in jsrm.items()) == pytest.approx(best)


def test_run_invariants(small_runs):
    cg = small_runs["cgjsja"]
    for model in ("cgjsja", "jsrm", "jsrr", "jspa"):
        for s in small_runs[model].slots:
            assert np.all(s.rates >= 0)
            assert set(s.allocation) <= set(range(SMALL.n_channels))
            assert s.channels_won.sum() <= s.idle_count
    for s in cg.slots:
        assert s.bids == pytest.approx(np.minimum(s.bids, s.wallets))
        assert s.wallets.sum() == pytest.approx(100.0)
    assert small_runs["jsrm"].rates.sum() >= cg.rates.sum()


def test_joint_models_respect_fusion():
    cfg = ScenarioConfig(n_slots=60, seed=8, sensing_prefs=(1, 1, 1))
    streams = Streams(cfg.seed)
    state = SimState.initial(cfg)
    for _ in range(cfg.n_slots):
        obs = observe(cfg, streams)
        fr, out = play_slot(state, obs, cfg, streams, MODELS)
        idle = set(fr.idle)
        unsensed = set(np.flatnonzero(~obs.sensing_map.any(axis=0)).tolist())
        assert not idle & unsensed
        for model in ("cgjsja", "jspa", "jsrr", "jsrm"):
            assert set(c for c, s in out[model].allocation.items() if s is not None) <= idle


def test_jsrr_fairness_window():
    cfg = ScenarioConfig(n_slots=200, seed=5)
    res = run_models(cfg, ("jsrr",))["jsrr"]
    window = cfg.n_sus * cfg.n_channels
    counts = np.array([s.channels_won for s in res.slots])
    max_idle = max(s.idle_count for s in res.slots)
    for start in range(0, len(counts) - window):
        total = counts[start:start + window].sum(axis=0)
        assert total.max() - total.min() <= max_idle


def test_determinism():
    a = run_models(SMALL, ("cgjsja", "ispa"))
    b = run_models(SMALL, ("cgjsja", "ispa"))
    for m in a:
        assert np.array_equal(a[m].rates, b[m].rates)
        assert a[m].total_missed == b[m].total_missed


def test_ispa_misses_and_scatter(small_runs):
    assert small_runs["ispa"].total_missed > 0
    rows = small_runs["cgjsja"].scatter(su=2, idle_count=2)
    assert all(r[1] == 2 and r[4] == 2 for r in rows)
