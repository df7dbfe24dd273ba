import itertools

import numpy as np
import pytest

from coopsense import fixtures as fx
from coopsense.detection import PdMatrix
from coopsense.game import (CharacteristicFunction, binary_entropy, characteristic_function,
                            coalition_effective_pd, entity_count, gated_reward, members,
                            membership_matrix)


def test_binary_entropy_values():
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert binary_entropy(0.0734) == pytest.approx(0.3785, abs=5e-4)
    with pytest.raises(ValueError):
        binary_entropy(1.2)


def test_gated_reward_values():
    assert gated_reward(0.5, 1) == 0.0 and gated_reward(0.5, -1) == 0.0
    assert gated_reward(0.7054, -1) == 0.0
    assert gated_reward(0.0968, -1) == pytest.approx(0.5412, abs=5e-4)
    assert gated_reward(0.8837, 1) == pytest.approx(1 - binary_entropy(0.8837))


def test_coalition_effective_pd_examples():
    pd = fx.example_pd_matrix()
    d = fx.DECISIONS
    assert coalition_effective_pd(0b011, 0, pd, d) == pytest.approx(0.0734)
    assert coalition_effective_pd(0b110, 0, pd, d) == pytest.approx(0.5)
    assert coalition_effective_pd(0b111, 1, pd, d) == pytest.approx(0.8837)


def test_entity_count_examples():
    smap = fx.SENSING_MAP
    assert entity_count(0b001, 0, smap) == 2
    assert entity_count(0b101, 0, smap) == 1
    assert entity_count(0b010, 2, smap) == 1


def test_worked_example_characteristic_function():
    v = fx.example_game()
    for mask, worth in fx.WORTH.items():
        assert v(mask) == pytest.approx(worth, abs=1e-3)


def test_characteristic_function_by_hand_loop():
    # literal per-coalition loop against the vectorised builder
    pd = fx.example_pd_matrix()
    v = fx.example_game()
    for mask in range(1, 8):
        total = 0.0
        for j in range(3):
            if not any(fx.SENSING_MAP[i, j] for i in members(mask)):
                continue
            p = coalition_effective_pd(mask, j, pd, fx.DECISIONS)
            total += gated_reward(p, fx.DECISIONS[j]) / entity_count(mask, j, fx.SENSING_MAP)
        assert v(mask) == pytest.approx(len(members(mask)) * total, abs=1e-12)


def test_zero_information_game():
    pd = PdMatrix(np.full((3, 4), 0.5), np.ones((3, 4), dtype=bool))
    v = characteristic_function(pd, [1, -1, 1, -1])
    assert np.all(v.worth == 0.0)


def test_single_player_certainty():
    pd = PdMatrix(np.array([[0.0]]), np.array([[True]]))
    v = characteristic_function(pd, [-1])
    assert v(1) == pytest.approx(1.0)


def test_ungated_formula_differs():
    v = fx.example_game(gated=False)
    assert abs(v(4) - fx.WORTH[4]) > 1e-3


def test_round_trip_dict():
    v = fx.example_game()
    w = CharacteristicFunction.from_dict(v.to_dict())
    assert np.array_equal(v.worth, w.worth)
    w2 = CharacteristicFunction.from_dict({"worth": v.to_dict()})
    assert w2.n_players == 3


def test_membership_matrix():
    m = membership_matrix(3)
    assert m.shape == (8, 3)
    for s in range(8):
        assert list(np.flatnonzero(m[s])) == members(s)


def test_from_function_and_scaled():
    v = CharacteristicFunction.from_function(2, lambda s: float(bin(s).count("1")) ** 2)
    assert v(3) == 4.0 and v.scaled(0.5)(3) == 2.0
    assert v.grand == 3 and v.grand_worth == 4.0


def test_rejects_mismatched_inputs():
    pd = PdMatrix(np.full((2, 2), 0.3), np.ones((2, 2), dtype=bool))
    with pytest.raises(ValueError):
        characteristic_function(pd, [1, -1, 1])
