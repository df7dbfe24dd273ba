"""Entropy-based transferable-utility game built from fused sensing results.

Coalitions are bitmasks: bit ``i`` set means SU ``i`` (0-based) is a member.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detection import PU_ABSENT, PU_PRESENT, PdMatrix

MAX_PLAYERS = 20


@dataclass
class CharacteristicFunction:
    """Worth of every coalition, indexed by bitmask; ``worth[0]`` is 0."""

    n_players: int
    worth: np.ndarray

    def __post_init__(self):
        self.worth = np.asarray(self.worth, dtype=float)
        if self.n_players < 1:
            raise ValueError("a game needs at least one player")
        if self.worth.shape != (1 << self.n_players,):
            raise ValueError(f"expected {1 << self.n_players} worths, got {self.worth.shape}")

    def __call__(self, coalition: int) -> float:
        return float(self.worth[coalition])

    @property
    def grand(self) -> int:
        return (1 << self.n_players) - 1

    @property
    def grand_worth(self) -> float:
        return float(self.worth[self.grand])

    def scaled(self, c: float) -> "CharacteristicFunction":
        return CharacteristicFunction(self.n_players, self.worth * c)

    def to_dict(self) -> dict[str, float]:
        return {str(s): float(self.worth[s]) for s in range(1, self.grand + 1)}

    @classmethod
    def from_dict(cls, data: dict) -> "CharacteristicFunction":
        if "worth" in data and isinstance(data["worth"], dict):
            data = data["worth"]
        masks = {int(k): float(v) for k, v in data.items()}
        grand = max(masks)
        n = grand.bit_length()
        if grand != (1 << n) - 1 or len(masks) != grand:
            raise ValueError("worth table must list every non-empty coalition exactly once")
        worth = np.zeros(grand + 1)
        for s, w in masks.items():
            worth[s] = w
        return cls(n, worth)

    @classmethod
    def from_function(cls, n_players: int, fn) -> "CharacteristicFunction":
        worth = np.zeros(1 << n_players)
        for s in range(1, 1 << n_players):
            worth[s] = fn(s)
        return cls(n_players, worth)


def members(coalition: int) -> list[int]:
    return [i for i in range(coalition.bit_length()) if coalition >> i & 1]


def membership_matrix(n_players: int) -> np.ndarray:
    """Boolean (2^n, n) table; row ``s`` flags the members of coalition ``s``."""
    masks = np.arange(1 << n_players)[:, None]
    return (masks >> np.arange(n_players)[None, :]) & 1 == 1


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def _entropy_array(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p)
    return np.where((p <= 0.0) | (p >= 1.0), 0.0, h)


def gated_reward(p: float, d: int) -> float:
    """Uncertainty reduction ``1 - H(p)``, paid only when p agrees with decision d."""
    agrees = (d == PU_PRESENT and p >= 0.5) or (d == PU_ABSENT and p <= 0.5)
    return 1.0 - binary_entropy(p) if agrees else 0.0


def _gated_reward_array(p: np.ndarray, d, gated: bool = True) -> np.ndarray:
    reward = 1.0 - _entropy_array(p)
    if not gated:
        return reward
    agrees = np.where(np.asarray(d) == PU_PRESENT, p >= 0.5, p <= 0.5)
    return np.where(agrees, reward, 0.0)


def coalition_effective_pd(coalition: int, channel: int, pd: PdMatrix, decisions) -> float:
    """|max_{i in S} p_ij * D_j|: the member probability closest to the decision."""
    if coalition <= 0:
        raise ValueError("coalition must be non-empty")
    d = int(decisions[channel])
    return abs(max(pd.entries[i, channel] * d for i in members(coalition)))


def entity_count(coalition: int, channel: int, sensing_map) -> int:
    """The coalition (as one entity, if it senses the channel) plus every outside SU sensing it."""
    if coalition <= 0:
        raise ValueError("coalition must be non-empty")
    col = np.asarray(sensing_map, dtype=bool)[:, channel]
    inside = any(col[i] for i in members(coalition))
    outside = sum(1 for i in range(len(col)) if col[i] and not coalition >> i & 1)
    return int(inside) + outside


def characteristic_function(pd: PdMatrix, decisions, sensing_map=None,
                            gated: bool = True) -> CharacteristicFunction:
    """Worth of every coalition, vectorised over the 2^N bitmasks.

    ``gated=False`` evaluates the bare formula without the agreement gate; it
    exists only to demonstrate why the gate is needed.
    """
    decisions = np.asarray(decisions, dtype=int)
    n, m = pd.shape
    if sensing_map is None:
        sensing_map = pd.sensed
    sensing_map = np.asarray(sensing_map, dtype=bool)
    if sensing_map.shape != (n, m) or decisions.shape != (m,):
        raise ValueError("sensing map, Pd matrix and decision vector dimensions disagree")
    if not np.all(np.isin(decisions, (PU_PRESENT, PU_ABSENT))):
        raise ValueError("decisions must be +1 or -1")
    if n > MAX_PLAYERS:
        raise ValueError(f"at most {MAX_PLAYERS} players supported")

    mem = membership_matrix(n)[1:]
    size = mem.sum(axis=1)
    p = pd.entries
    # closest-to-decision member probability per (coalition, channel)
    hi = np.where(mem[:, :, None], p[None, :, :], -np.inf).max(axis=1)
    lo = np.where(mem[:, :, None], p[None, :, :], np.inf).min(axis=1)
    eff = np.where(decisions[None, :] == PU_PRESENT, hi, lo)

    inside = (mem.astype(int) @ sensing_map.astype(int)) > 0
    outside = (~mem).astype(int) @ sensing_map.astype(int)
    count = inside.astype(int) + outside

    reward = _gated_reward_array(eff, decisions[None, :], gated)
    terms = np.where(inside, reward / np.maximum(count, 1), 0.0)
    worth = np.zeros(1 << n)
    worth[1:] = size * terms.sum(axis=1)
    return CharacteristicFunction(n, worth)
