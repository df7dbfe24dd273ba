"""CP-OFDM autocorrelation detector at the test-statistic level, plus OR fusion.

The statistic is Gaussian with mean 0 under H0 and ``mu1(snr)`` under H1, with
a common standard deviation fixed by the number of samples in the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erfc, erfcinv

PU_PRESENT = 1
PU_ABSENT = -1
UNSENSED_PD = 0.5


@dataclass(frozen=True)
class DetectorConfig:
    useful_symbol_len: int = 32
    cp_len: int = 8
    n_blocks: int = 100
    p_fa: float = 0.05

    def __post_init__(self):
        if self.useful_symbol_len <= 0 or self.cp_len <= 0 or self.n_blocks <= 0:
            raise ValueError("symbol length, CP length and block count must be positive")
        if self.cp_len > self.useful_symbol_len:
            raise ValueError("cp_len must not exceed useful_symbol_len")
        if not 0.0 < self.p_fa < 1.0:
            raise ValueError(f"p_fa must lie in (0, 1), got {self.p_fa}")

    @property
    def n_samples(self) -> int:
        return self.n_blocks * (self.useful_symbol_len + self.cp_len)

    @property
    def sigma(self) -> float:
        """Standard deviation of the autocorrelation estimate under both hypotheses."""
        return 1.0 / math.sqrt(2.0 * self.n_samples)

    def mean_h1(self, snr_db: float) -> float:
        gamma = 10.0 ** (snr_db / 10.0)
        cp_fraction = self.cp_len / (self.useful_symbol_len + self.cp_len)
        return cp_fraction * gamma / (1.0 + gamma)

    def with_pfa(self, p_fa: float) -> "DetectorConfig":
        return DetectorConfig(self.useful_symbol_len, self.cp_len, self.n_blocks, p_fa)


@dataclass
class PdMatrix:
    """Per-(SU, channel) detection probabilities; unsensed cells hold 0.5."""

    entries: np.ndarray
    sensed: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        self.sensed = np.asarray(self.sensed, dtype=bool)
        if self.entries.ndim != 2 or self.entries.shape != self.sensed.shape:
            raise ValueError("entries and sensed must be equally shaped 2-D tables")
        if np.any((self.entries < 0) | (self.entries > 1)):
            raise ValueError("detection probabilities must lie in [0, 1]")
        self.entries = np.where(self.sensed, self.entries, UNSENSED_PD)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def threshold_for_pfa(cfg: DetectorConfig, sigma: float) -> float:
    """Threshold eta with 0.5*erfc(eta / (sqrt(2)*sigma)) == cfg.p_fa."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return math.sqrt(2.0) * sigma * float(erfcinv(2.0 * cfg.p_fa))


def pd_from_snr(cfg: DetectorConfig, snr_db: float) -> float:
    sigma = cfg.sigma
    eta = threshold_for_pfa(cfg, sigma)
    mu1 = cfg.mean_h1(snr_db)
    return float(0.5 * erfc((eta - mu1) / (math.sqrt(2.0) * sigma)))


def pd_from_snr_array(cfg: DetectorConfig, snr_db) -> np.ndarray:
    """Vectorised :func:`pd_from_snr`."""
    snr_db = np.asarray(snr_db, dtype=float)
    sigma = cfg.sigma
    eta = threshold_for_pfa(cfg, sigma)
    gamma = 10.0 ** (snr_db / 10.0)
    mu1 = cfg.cp_len / (cfg.useful_symbol_len + cfg.cp_len) * gamma / (1.0 + gamma)
    return 0.5 * erfc((eta - mu1) / (math.sqrt(2.0) * sigma))


def simulate_local_decision(cfg: DetectorConfig, snr_db: float, pu_present: bool,
                            rng: np.random.Generator) -> int:
    return int(simulate_local_decisions(cfg, snr_db, pu_present, rng, size=None))


def simulate_local_decisions(cfg: DetectorConfig, snr_db, pu_present, rng: np.random.Generator,
                             size=None) -> np.ndarray:
    """Draw test statistics and threshold them; +1 means PU declared present.

    ``snr_db`` and ``pu_present`` broadcast against each other (and ``size``).
    """
    sigma = cfg.sigma
    eta = threshold_for_pfa(cfg, sigma)
    snr_db = np.asarray(snr_db, dtype=float)
    gamma = 10.0 ** (snr_db / 10.0)
    mu1 = cfg.cp_len / (cfg.useful_symbol_len + cfg.cp_len) * gamma / (1.0 + gamma)
    mean = np.where(np.asarray(pu_present, dtype=bool), mu1, 0.0)
    if size is None:
        size = np.broadcast(mean).shape
    r = rng.normal(mean, sigma, size=size)
    return np.where(r > eta, PU_PRESENT, PU_ABSENT)


def fuse_or(local_decisions: Sequence[Iterable[int]]) -> np.ndarray:
    """OR-fuse per-channel lists of local decisions into a decision vector.

    A channel nobody sensed is declared occupied.
    """
    out = np.empty(len(local_decisions), dtype=int)
    for j, reports in enumerate(local_decisions):
        reports = list(reports)
        if not reports or any(r == PU_PRESENT for r in reports):
            out[j] = PU_PRESENT
        else:
            out[j] = PU_ABSENT
    return out


def fuse_or_matrix(local: np.ndarray, sensed: np.ndarray) -> np.ndarray:
    """Array form of :func:`fuse_or` for an N x M decision table and sensing map."""
    local = np.asarray(local)
    sensed = np.asarray(sensed, dtype=bool)
    any_present = np.any(sensed & (local == PU_PRESENT), axis=0)
    nobody = ~np.any(sensed, axis=0)
    return np.where(any_present | nobody, PU_PRESENT, PU_ABSENT)


def roc_curve(cfg: DetectorConfig, snr_db: float, n_points: int) -> list[tuple[float, float]]:
    """(P_fa, P_d) pairs over an open grid of false-alarm rates.

    The grid always contains the configured operating point ``cfg.p_fa``.
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    # endpoints excluded: erfcinv diverges at 0 and 2
    pfas = np.union1d(np.linspace(0.0, 1.0, n_points + 2)[1:-1], [cfg.p_fa])
    return [(float(p), pd_from_snr(cfg.with_pfa(float(p)), snr_db)) for p in pfas]
