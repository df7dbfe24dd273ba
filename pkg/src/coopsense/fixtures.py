"""The 3-SU, 3-channel worked example and checks against its reference values.

Channel and SU indices are 0-based here; reports number them from 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .auction import normalized_balance, run_vcg
from .detection import DetectorConfig, PdMatrix, pd_from_snr
from .game import CharacteristicFunction, characteristic_function
from .solutions import nucleolus, normalize_100, shapley, tau_value

SENSING_MAP = np.array([[1, 0, 0],
                        [0, 1, 1],
                        [1, 1, 0]], dtype=bool)
SNR_DB = np.array([[-19.5949, np.nan, np.nan],
                   [np.nan, -7.2246, -17.0642],
                   [-8.5656, -17.1763, np.nan]])
PD = np.array([[0.0734, 0.5, 0.5],
               [0.5, 0.8837, 0.0968],
               [0.7054, 0.0953, 0.5]])
DECISIONS = np.array([-1, 1, -1])
# bitmask -> worth for {1}, {2}, {1,2}, {3}, {1,3}, {2,3}, {1,2,3}
WORTH = {1: 0.3107, 2: 0.7819, 3: 2.1851, 4: 0.0, 5: 1.2427, 6: 2.0450, 7: 4.9316}
SHAPLEY_NORM = np.array([30.5526, 43.4645, 25.9830])
TAU_NORM = np.array([30.6662, 43.3531, 25.9807])
NUCLEOLUS_NORM = np.array([32.2484, 41.8029, 25.9487])
CAPS = np.array([[0.0547, 0.0429, 0.0974],
                 [0.7187, 0.0143, 0.4765],
                 [2.0485, 0.9998, 0.0318]])
BIDS = np.array([24.7943, 6.9917, 22.3673])
IDLE = (0, 2)
INCREMENT = 1e-4
# (winner, channel, price, residual bid)
AUCTION_ROUNDS = [(0, 2, 22.3674, 2.4269), (2, 0, 6.9918, 15.3755)]
RATES = np.array([0.0974, 0.0, 2.0485])
BALANCES = np.array([9.8810, 41.8029, 18.9569])
NORM_BALANCES = np.array([13.9876, 59.1767, 26.8357])

TOLERANCES = {
    "detection": 2.5e-3,
    "characteristic_function": 1e-3,
    "shapley": 0.01,
    "tau": 0.01,
    "nucleolus": 0.02,
    "auction": 1e-3,
}


def example_pd_matrix(overrides=None) -> PdMatrix:
    pd = PD.copy()
    for (i, j), value in (overrides or {}).items():
        pd[i, j] = value
    return PdMatrix(pd, SENSING_MAP)


def example_game(overrides=None, gated: bool = True) -> CharacteristicFunction:
    return characteristic_function(example_pd_matrix(overrides), DECISIONS, SENSING_MAP, gated=gated)


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: max error {self.max_error:.3g} (tol {self.tolerance:g}) {self.detail}"


def _check(name, got, expected, tol, detail="") -> CheckResult:
    got = np.asarray(got, dtype=float)
    expected = np.asarray(expected, dtype=float)
    err = float(np.max(np.abs(got - expected))) if got.size else 0.0
    return CheckResult(name, bool(err <= tol), err, tol, detail)


def check_worked_example(tolerance: float | None = None, pd_overrides=None,
                        gated: bool = True) -> list[CheckResult]:
    """Replay the worked example through detection, game, solutions and auction.

    ``tolerance`` overrides every per-table tolerance; ``pd_overrides`` maps
    (su, channel) to a replacement detection probability.
    """
    tol = {k: (tolerance if tolerance is not None else v) for k, v in TOLERANCES.items()}
    results = []

    det = DetectorConfig()
    mapped = np.array([[pd_from_snr(det, s) if SENSING_MAP[i, j] else 0.5
                        for j, s in enumerate(row)] for i, row in enumerate(SNR_DB)])
    results.append(_check("detection probabilities", mapped, PD,
                           tol["detection"],
                           f"mapped={np.round(mapped, 4).tolist()}"))

    v = example_game(pd_overrides, gated)
    got = [v(s) for s in sorted(WORTH)]
    want = [WORTH[s] for s in sorted(WORTH)]
    labels = {1: "v(1)", 2: "v(2)", 3: "v(12)", 4: "v(3)", 5: "v(13)", 6: "v(23)", 7: "v(123)"}
    detail = ", ".join(f"{labels[s]}={v(s):.4f}" for s in sorted(WORTH))
    results.append(_check("characteristic function", got, want, tol["characteristic_function"],
                          detail))

    try:
        got = {"shapley": normalize_100(shapley(v)).values,
               "tau": normalize_100(tau_value(v)).values,
               "nucleolus": normalize_100(nucleolus(v)).values}
    except ValueError as exc:
        results.append(CheckResult("one-point solutions", False,
                                   float("inf"), tol["nucleolus"], str(exc)))
    else:
        want = {"shapley": SHAPLEY_NORM, "tau": TAU_NORM, "nucleolus": NUCLEOLUS_NORM}
        errs = {k: float(np.max(np.abs(got[k] - want[k]))) for k in got}
        detail = " ".join(f"{k}={np.round(got[k], 4).tolist()}" for k in got)
        results.append(CheckResult("one-point solutions",
                                   all(errs[k] <= tol[k] for k in errs), max(errs.values()),
                                   max(tol[k] for k in errs), detail))

    wallets = NUCLEOLUS_NORM
    outcome = run_vcg(BIDS, IDLE, CAPS, INCREMENT, wallets=wallets)
    trace_ok = [(r.winner, r.channel) for r in outcome.rounds] == [(w, c) for w, c, _, _ in
                                                                   AUCTION_ROUNDS]
    got = [x for r in outcome.rounds for x in (r.price, r.residual)]
    want = [x for _, _, p, res in AUCTION_ROUNDS for x in (p, res)]
    if not trace_ok or len(got) != len(want):
        results.append(CheckResult("auction trace", False, float("inf"),
                                   tol["auction"], "winner/channel sequence differs"))
    else:
        rates = np.zeros(3)
        for r in outcome.rounds:
            rates[r.winner] += CAPS[r.winner, r.channel]
        got += rates.tolist()
        want += RATES.tolist()
        trace = "; ".join(f"SU{r.winner + 1} wins ch{r.channel + 1} at {r.price:.4f}"
                          for r in outcome.rounds)
        results.append(_check("auction trace", got, want, tol["auction"], trace))

    norm_bal = normalized_balance(outcome.balances)
    got = np.concatenate([outcome.balances, norm_bal.values])
    want = np.concatenate([BALANCES, NORM_BALANCES])
    results.append(_check("auction balances", got, want, tol["auction"],
                          f"balances={np.round(outcome.balances, 4).tolist()} "
                          f"normalised={np.round(norm_bal.values, 4).tolist()}"))
    return results


def example_inputs() -> dict[str, dict]:
    """The worked example as CLI input documents (0-based channel indices)."""
    pd = example_pd_matrix()
    return {
        "game_input.json": {"pd_matrix": pd.entries.tolist(), "sensed": SENSING_MAP.tolist(),
                            "decisions": DECISIONS.tolist()},
        "auction_input.json": {"wallets": NUCLEOLUS_NORM.tolist(), "bids": BIDS.tolist(),
                               "idle_channels": list(IDLE), "capacity_estimates": CAPS.tolist(),
                               "increment": INCREMENT},
    }
