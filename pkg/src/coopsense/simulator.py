"""Multi-slot sensing/transmission loop and the four baseline access models.

Every slot the fusion center collects sensing reports, fuses them, plays the
coalition game, settles wallets and collects bids. Bids and wallets evolve the
same way under every access model (baselines take their demand from the same
bids), so one pass over the random draws can score all five models at once.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .auction import AuctionOutcome, normalized_balance, run_vcg, settle_wallets
from .detection import (PU_ABSENT, PU_PRESENT, DetectorConfig, PdMatrix, fuse_or_matrix,
                        pd_from_snr_array, simulate_local_decisions)
from .game import CharacteristicFunction, characteristic_function
from .solutions import NORMALIZED, PayoffVector, normalize_100, solve

MODELS = ("cgjsja", "jspa", "ispa", "jsrr", "jsrm")
MODEL_LABELS = {"cgjsja": "CG-JSJA", "jspa": "JSPA", "ispa": "ISPA", "jsrr": "JSRR", "jsrm": "JSRM"}
STREAMS = ("pu_activity", "sensing_map", "sensing_snr", "detection", "transmission_snr",
           "buffers")


@dataclass
class ScenarioConfig:
    n_sus: int = 3
    n_channels: int = 5
    n_slots: int = 1000
    snr_low_db: float = -25.0
    snr_high_db: float = -5.0
    bandwidth_hz: float = 7e6
    pu_activity_prob: float = 0.5
    bid_walk_sigma: float = 1.0
    level_cap: float = 10.0
    seed: int = 0
    model: str = "cgjsja"
    solution: str = "nucleolus"
    increment: float = 1e-4
    sensing_prefs: tuple[int, ...] | None = None
    p_fa: float = 0.05
    backoff_rounds: int = 3
    defer_prob: float = 0.5
    backoff_penalty: float = 0.25

    def __post_init__(self):
        if min(self.n_sus, self.n_channels, self.n_slots) < 1:
            raise ValueError("n_sus, n_channels and n_slots must be positive")
        if not self.snr_low_db < self.snr_high_db:
            raise ValueError("snr_low_db must be below snr_high_db")
        if self.bandwidth_hz <= 0 or self.bid_walk_sigma <= 0 or self.level_cap <= 0:
            raise ValueError("bandwidth, bid_walk_sigma and level_cap must be positive")
        if not 0.0 <= self.pu_activity_prob <= 1.0:
            raise ValueError("pu_activity_prob must be a probability")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.sensing_prefs is not None:
            self.sensing_prefs = tuple(int(k) for k in self.sensing_prefs)
            if len(self.sensing_prefs) != self.n_sus:
                raise ValueError("need one sensing preference per SU")
            if any(not 0 <= k <= self.n_channels for k in self.sensing_prefs):
                raise ValueError("sensing preferences must lie in [0, n_channels]")

    @property
    def prefs(self) -> tuple[int, ...]:
        if self.sensing_prefs is not None:
            return self.sensing_prefs
        return (self.n_channels,) * self.n_sus

    @property
    def detector(self) -> DetectorConfig:
        return DetectorConfig(p_fa=self.p_fa)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sensing_prefs"] = list(self.prefs)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("sensing_prefs") is not None:
            data["sensing_prefs"] = tuple(data["sensing_prefs"])
        return cls(**data)


class Streams:
    """Independent named random streams derived from one seed.

    Changing how one stream is consumed never shifts another's draws.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._rngs: dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in self._rngs:
            key = tuple(name.encode())
            ss = np.random.SeedSequence(self.seed, spawn_key=key)
            self._rngs[name] = np.random.default_rng(ss)
        return self._rngs[name]


@dataclass
class BufferState:
    level: np.ndarray


@dataclass
class SimState:
    buffers: BufferState
    prev_norm_balance: np.ndarray | None = None
    slot: int = 0
    rr_next: int = 0

    @classmethod
    def initial(cls, cfg: ScenarioConfig) -> "SimState":
        return cls(BufferState(np.full(cfg.n_sus, cfg.level_cap / 2.0)))


@dataclass
class Observation:
    """Ground truth and sensing reports for one slot.

    ``decisions`` and ``bids`` are normally derived; setting them injects
    fixed values (used to replay the worked example).
    """

    pu_present: np.ndarray
    sensing_map: np.ndarray
    pd: PdMatrix
    local: np.ndarray
    caps: np.ndarray
    decisions: np.ndarray | None = None
    bids: np.ndarray | None = None


@dataclass
class FusionResult:
    decisions: np.ndarray
    game: CharacteristicFunction
    payoff: PayoffVector
    payoff_norm: PayoffVector
    wallets: PayoffVector
    bids: np.ndarray
    auction: AuctionOutcome

    @property
    def idle(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.decisions == PU_ABSENT)]


@dataclass
class SlotMetrics:
    slot: int
    model: str
    rates: np.ndarray
    channels_won: np.ndarray
    collisions: np.ndarray
    missed_detections: np.ndarray
    bids: np.ndarray
    wallets: np.ndarray
    idle_count: int
    allocation: dict[int, int | None] = field(default_factory=dict)


def build_sensing_map(prefs, n_channels: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Give SU i ``prefs[i]`` consecutive channels from a rotating pointer.

    The pointer starts at a random channel (0 without ``rng``) and advances by
    each SU's count, spreading coverage; overlaps happen once the counts exceed
    the number of channels, and some channels may stay unsensed.
    """
    prefs = [int(k) for k in prefs]
    if any(k < 0 or k > n_channels for k in prefs):
        raise ValueError("each preference must lie in [0, n_channels]")
    out = np.zeros((len(prefs), n_channels), dtype=bool)
    pointer = int(rng.integers(n_channels)) if rng is not None else 0
    for i, k in enumerate(prefs):
        out[i, (pointer + np.arange(k)) % n_channels] = True
        pointer = (pointer + k) % n_channels
    return out


def capacity_mbps(snr_db, bandwidth_hz: float = 7e6) -> np.ndarray:
    gamma = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    return bandwidth_hz * np.log2(1.0 + gamma) / 1e6


def estimate_capacities(rng: np.random.Generator, cfg: ScenarioConfig) -> np.ndarray:
    snr = rng.uniform(cfg.snr_low_db, cfg.snr_high_db, size=(cfg.n_sus, cfg.n_channels))
    return capacity_mbps(snr, cfg.bandwidth_hz)


def update_bids(buffers: BufferState, wallets, rng: np.random.Generator,
                cfg: ScenarioConfig) -> np.ndarray:
    """Advance the buffer random walk and bid a fill-proportional share of the wallet.

    The walk is held in [0, level_cap]: a full buffer cannot grow further and
    already bids the whole wallet.
    """
    wallets = np.asarray(wallets, dtype=float)
    step = rng.normal(0.0, cfg.bid_walk_sigma, size=len(buffers.level))
    buffers.level = np.clip(buffers.level + step, 0.0, cfg.level_cap)
    return wallets * np.minimum(1.0, buffers.level / cfg.level_cap)


def observe(cfg: ScenarioConfig, streams: Streams) -> Observation:
    """Draw one slot's PU activity, sensing map, reports and capacity estimates."""
    n, m = cfg.n_sus, cfg.n_channels
    pu = streams["pu_activity"].random(m) < cfg.pu_activity_prob
    smap = build_sensing_map(cfg.prefs, m, streams["sensing_map"])
    snr = streams["sensing_snr"].uniform(cfg.snr_low_db, cfg.snr_high_db, size=(n, m))
    det = cfg.detector
    local = simulate_local_decisions(det, snr, pu[None, :], streams["detection"], size=(n, m))
    pd = PdMatrix(pd_from_snr_array(det, snr), smap)
    caps = estimate_capacities(streams["transmission_snr"], cfg)
    return Observation(pu, smap, pd, local, caps)


def _game_payoff(v: CharacteristicFunction, method: str) -> tuple[PayoffVector, PayoffVector]:
    n = v.n_players
    if v.grand_worth <= 0:
        return PayoffVector(np.zeros(n)), PayoffVector(np.full(n, 100.0 / n), NORMALIZED)
    raw = solve(v, method)
    return raw, normalize_100(np.clip(raw.values, 0.0, None))


def fusion_center(state: SimState, obs: Observation, cfg: ScenarioConfig,
                  streams: Streams | None) -> FusionResult:
    """Fuse reports, play the game, settle wallets, collect bids, run the auction."""
    if obs.decisions is not None:
        decisions = np.asarray(obs.decisions, dtype=int)
    else:
        decisions = fuse_or_matrix(obs.local, obs.sensing_map)
    v = characteristic_function(obs.pd, decisions, obs.sensing_map)
    raw, norm = _game_payoff(v, cfg.solution)
    wallets = settle_wallets(state.prev_norm_balance, norm)
    if obs.bids is not None:
        bids = np.asarray(obs.bids, dtype=float)
    else:
        bids = update_bids(state.buffers, wallets, streams["buffers"], cfg)
    idle = np.flatnonzero(decisions == PU_ABSENT)
    outcome = run_vcg(bids, idle, obs.caps, cfg.increment, wallets=wallets.values)
    return FusionResult(decisions, v, raw, norm, wallets, bids, outcome)


def _metrics(cfg, state, model, fr: FusionResult, allocation: dict, gains: dict,
             collisions, missed) -> SlotMetrics:
    n = cfg.n_sus
    rates = np.zeros(n)
    won = np.zeros(n, dtype=int)
    for ch, su in allocation.items():
        if su is None:
            continue
        won[su] += 1
        rates[su] += gains.get(ch, 0.0)
    return SlotMetrics(state.slot, model, rates, won, np.asarray(collisions, dtype=int),
                       np.asarray(missed, dtype=int), np.asarray(fr.bids, dtype=float),
                       fr.wallets.values.copy(), len(fr.idle), allocation)


def _granted(cfg, state, model, fr, obs, allocation) -> SlotMetrics:
    """Metrics for coordinated models: the grantee gets full capacity unless the PU is there."""
    gains = {}
    missed = np.zeros(cfg.n_sus, dtype=int)
    for ch, su in allocation.items():
        if su is None:
            continue
        if obs.pu_present[ch]:
            missed[su] += 1
            gains[ch] = 0.0
        else:
            gains[ch] = float(obs.caps[su, ch])
    return _metrics(cfg, state, model, fr, allocation, gains, np.zeros(cfg.n_sus), missed)


def allocate_jsrm(idle, caps) -> dict[int, int]:
    caps = np.asarray(caps, dtype=float)
    return {int(ch): int(np.argmax(caps[:, ch])) for ch in idle}


def allocate_jsrr(idle, n_sus: int, start: int) -> tuple[dict[int, int], int]:
    """Deal idle channels round-robin from SU ``start``; returns the next start."""
    allocation = {}
    su = start % n_sus
    for ch in sorted(int(c) for c in idle):
        allocation[ch] = su
        su = (su + 1) % n_sus
    return allocation, su


def largest_remainder(shares, total: int) -> np.ndarray:
    """Integer split of ``total`` proportional to ``shares`` (sum is exactly ``total``)."""
    shares = np.asarray(shares, dtype=float)
    if total <= 0 or shares.sum() <= 0:
        return np.zeros(len(shares), dtype=int)
    quota = shares / shares.sum() * total
    base = np.floor(quota).astype(int)
    left = total - base.sum()
    order = sorted(range(len(shares)), key=lambda i: (-(quota[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


def resolve_contention(contenders: list[int], rng: np.random.Generator, rounds: int = 3,
                       defer_prob: float = 0.5, penalty: float = 0.25) -> tuple[int | None, float]:
    """CSMA-style backoff among SUs that picked the same channel.

    Each round every contender defers with ``defer_prob``; a lone transmitter
    wins and keeps ``1 - penalty * rounds_used`` of the slot. Returns
    (winner, fraction) or (None, 0.0) if contention outlives ``rounds``.
    """
    if len(contenders) == 1:
        return contenders[0], 1.0
    for r in range(1, rounds + 1):
        defer = rng.random(len(contenders)) < defer_prob
        active = [c for c, d in zip(contenders, defer) if not d]
        if len(active) == 1:
            return active[0], max(0.0, 1.0 - penalty * r)
    return None, 0.0


def _probabilistic(cfg, state, model, fr, obs, idle_sets, rng) -> SlotMetrics:
    """Uncoordinated access: each SU targets her best channels, clashes back off."""
    n = cfg.n_sus
    bids = np.asarray(fr.bids, dtype=float)
    if model == "jspa":
        counts = largest_remainder(bids, len(idle_sets[0]))
    else:
        total = bids.sum()
        counts = np.array([0 if total <= 0 else
                           min(len(idle_sets[i]), int(math.floor(bids[i] / total * len(idle_sets[i]) + 0.5)))
                           for i in range(n)])
    targets: dict[int, list[int]] = {}
    for i in range(n):
        ranked = sorted(idle_sets[i], key=lambda c: (-obs.caps[i, c], c))
        for ch in ranked[:counts[i]]:
            targets.setdefault(ch, []).append(i)

    allocation: dict[int, int | None] = {}
    gains = {}
    collisions = np.zeros(n, dtype=int)
    missed = np.zeros(n, dtype=int)
    for ch in sorted(targets):
        who = targets[ch]
        if obs.pu_present[ch]:
            for i in who:
                missed[i] += 1
        if len(who) > 1:
            for i in who:
                collisions[i] += 1
        winner, fraction = resolve_contention(who, rng, cfg.backoff_rounds, cfg.defer_prob,
                                              cfg.backoff_penalty)
        if winner is None:
            continue
        allocation[ch] = winner
        gains[ch] = 0.0 if obs.pu_present[ch] else float(obs.caps[winner, ch]) * fraction
    return _metrics(cfg, state, model, fr, allocation, gains, collisions, missed)


def access(model: str, cfg: ScenarioConfig, state: SimState, fr: FusionResult,
           obs: Observation, streams: Streams | None) -> SlotMetrics:
    idle = fr.idle
    if model == "cgjsja":
        return _granted(cfg, state, model, fr, obs, dict(fr.auction.allocation))
    if model == "jsrm":
        return _granted(cfg, state, model, fr, obs, allocate_jsrm(idle, obs.caps))
    if model == "jsrr":
        allocation, nxt = allocate_jsrr(idle, cfg.n_sus, state.rr_next)
        metrics = _granted(cfg, state, model, fr, obs, allocation)
        state.rr_next = nxt
        return metrics
    if model in ("jspa", "ispa"):
        rng = streams[f"backoff_{model}"]
        if model == "jspa":
            idle_sets = [idle] * cfg.n_sus
        else:
            own = obs.sensing_map & (obs.local == PU_ABSENT)
            idle_sets = [[int(j) for j in np.flatnonzero(own[i])] for i in range(cfg.n_sus)]
        return _probabilistic(cfg, state, model, fr, obs, idle_sets, rng)
    raise ValueError(f"unknown model {model!r}")


def play_slot(state: SimState, obs: Observation, cfg: ScenarioConfig, streams: Streams | None,
              models=MODELS) -> tuple[FusionResult, dict[str, SlotMetrics]]:
    """One Sx/Tx slot scored under each requested access model; advances ``state``."""
    fr = fusion_center(state, obs, cfg, streams)
    out = {m: access(m, cfg, state, fr, obs, streams) for m in models}
    state.prev_norm_balance = (None if (nb := normalized_balance(fr.auction.balances)) is None
                               else nb.values)
    state.slot += 1
    return fr, out


def run_slot_cgjsja(state: SimState, cfg: ScenarioConfig, streams: Streams,
                    obs: Observation | None = None) -> SlotMetrics:
    obs = obs if obs is not None else observe(cfg, streams)
    return play_slot(state, obs, cfg, streams, ("cgjsja",))[1]["cgjsja"]


def run_slot_baseline(state: SimState, cfg: ScenarioConfig, streams: Streams, model: str,
                      obs: Observation | None = None) -> SlotMetrics:
    if model not in ("jspa", "ispa", "jsrr", "jsrm"):
        raise ValueError(f"not a baseline model: {model!r}")
    obs = obs if obs is not None else observe(cfg, streams)
    return play_slot(state, obs, cfg, streams, (model,))[1][model]


@dataclass
class SimulationResult:
    model: str
    config: ScenarioConfig
    slots: list[SlotMetrics]

    @property
    def rates(self) -> np.ndarray:
        """(n_slots, n_sus) achieved rates in Mbps."""
        return np.array([s.rates for s in self.slots])

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.rates, axis=0)

    @property
    def total_missed(self) -> int:
        return int(sum(s.missed_detections.sum() for s in self.slots))

    @property
    def total_collisions(self) -> int:
        return int(sum(s.collisions.sum() for s in self.slots))

    def scatter(self, su: int | None = None, idle_count: int | None = None):
        """(bid, channels won) pairs, optionally for one SU / one idle count."""
        rows = []
        for s in self.slots:
            if idle_count is not None and s.idle_count != idle_count:
                continue
            for i in range(len(s.rates)):
                if su is None or i == su:
                    rows.append((s.slot, i, float(s.bids[i]), int(s.channels_won[i]), s.idle_count))
        return rows


def run_models(cfg: ScenarioConfig, models=MODELS) -> dict[str, SimulationResult]:
    """Run the slot loop once and score every model on the same draws."""
    streams = Streams(cfg.seed)
    state = SimState.initial(cfg)
    per_model: dict[str, list[SlotMetrics]] = {m: [] for m in models}
    for _ in range(cfg.n_slots):
        obs = observe(cfg, streams)
        _, out = play_slot(state, obs, cfg, streams, models)
        for m in models:
            per_model[m].append(out[m])
    return {m: SimulationResult(m, dataclasses.replace(cfg, model=m), per_model[m])
            for m in models}


def run_simulation(cfg: ScenarioConfig) -> SimulationResult:
    return run_models(cfg, (cfg.model,))[cfg.model]
