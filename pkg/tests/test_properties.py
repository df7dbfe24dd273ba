import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopsense.detection import DetectorConfig, PdMatrix, pd_from_snr_array
from coopsense.game import CharacteristicFunction, characteristic_function
from coopsense.properties import (game_property_violations, random_instance, run_property_suite,
                                  solution_property_violations)


@st.composite
def instances(draw, max_n=5, max_m=6):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    snr = np.array(draw(st.lists(st.floats(-25, -5), min_size=n * m, max_size=n * m))).reshape(n, m)
    sensed = np.array(draw(st.lists(st.booleans(), min_size=n * m, max_size=n * m))).reshape(n, m)
    decisions = draw(st.lists(st.sampled_from([-1, 1]), min_size=m, max_size=m))
    pd = PdMatrix(pd_from_snr_array(DetectorConfig(), snr), sensed)
    return characteristic_function(pd, decisions, sensed)


@settings(max_examples=300, deadline=None)
@given(instances())
def test_game_properties_hold(v):
    found = game_property_violations(v)
    assert not any(found.values()), found


@settings(max_examples=150, deadline=None)
@given(instances(max_n=4))
def test_solution_properties_hold(v):
    found = solution_property_violations(v)
    assert not any(found.values()), found


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3), st.sampled_from([-1, 1]))
def test_adding_a_sensor_never_lowers_worth(ps, d):
    # one channel sensed by everyone: the grand coalition dominates any sub-coalition
    pd = PdMatrix(np.array(ps)[:, None], np.ones((3, 1), dtype=bool))
    v = characteristic_function(pd, [d])
    for s in range(1, 8):
        assert v(7) >= v(s) - 1e-12


def test_single_player_vacuous():
    v = CharacteristicFunction(1, np.array([0.0, 0.4]))
    assert not any(game_property_violations(v).values())


def test_violation_detector_catches_bad_games():
    bad = CharacteristicFunction(2, np.array([0.0, 2.0, 2.0, 1.0]))
    found = game_property_violations(bad)
    assert found["monotonicity"] and found["super_additivity"]
    neg = CharacteristicFunction(2, np.array([0.0, -1.0, 0.0, 0.0]))
    assert game_property_violations(neg)["non_negativity"]


def test_random_instance_ranges():
    rng = np.random.default_rng(0)
    for _ in range(50):
        inst = random_instance(rng)
        n, m = inst.pd.shape
        assert 2 <= n <= 6 and 1 <= m <= 8
        assert set(np.unique(inst.decisions)) <= {-1, 1}


def test_ungated_formula_loses_monotonicity():
    # without the agreement gate a member nearer 0.5 drags the coalition's reward down
    pd = PdMatrix(np.array([[0.1], [0.4]]), np.ones((2, 1), dtype=bool))
    v = characteristic_function(pd, [1], gated=False)
    assert v(1) > v(3)
    assert not any(game_property_violations(characteristic_function(pd, [1])).values())
    report = run_property_suite(200, seed=1, gated=False, solutions=False)
    assert report.violations["monotonicity"] > 0 and report.counterexamples
    assert report.violations["non_negativity"] == 0


def test_suite_small_run_with_grid():
    small = run_property_suite(50, seed=2, grid_checks=5)
    assert small.ok and small.checked["nucleolus_grid"] == 5
    with pytest.raises(ValueError):
        run_property_suite(0)
