"""Randomised checks of the game's structural properties and the solvers' invariants."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .detection import DetectorConfig, PdMatrix, pd_from_snr_array
from .game import CharacteristicFunction, characteristic_function, membership_matrix
from .oracles import nucleolus_grid_3p, shapley_by_permutations
from .solutions import SolutionError, core_contains, nucleolus, shapley, tau_value

GAME_PROPERTIES = ("non_negativity", "monotonicity", "per_capita_balancedness",
                   "super_additivity")
SOLUTION_PROPERTIES = ("shapley_oracle", "nucleolus_core", "efficiency", "nucleolus_grid")


@dataclass
class Instance:
    pd: PdMatrix
    decisions: np.ndarray
    sensing_map: np.ndarray

    def game(self, gated: bool = True) -> CharacteristicFunction:
        return characteristic_function(self.pd, self.decisions, self.sensing_map, gated=gated)

    def to_dict(self) -> dict:
        return {"pd_matrix": self.pd.entries.tolist(),
                "sensed": self.sensing_map.tolist(),
                "decisions": self.decisions.tolist()}


def random_instance(rng: np.random.Generator, n_range=(2, 6), m_range=(1, 8),
                    snr_range=(-25.0, -5.0), sense_prob: float = 0.5,
                    detector: DetectorConfig | None = None) -> Instance:
    detector = detector or DetectorConfig()
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    m = int(rng.integers(m_range[0], m_range[1] + 1))
    snr = rng.uniform(*snr_range, size=(n, m))
    sensed = rng.random((n, m)) < sense_prob
    decisions = rng.choice(np.array([-1, 1]), size=m)
    return Instance(PdMatrix(pd_from_snr_array(detector, snr), sensed), decisions, sensed)


@lru_cache(maxsize=None)
def strict_subset_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All (S, T) with S a non-empty proper subset of T."""
    ss, ts = [], []
    for t in range(1, 1 << n):
        s = (t - 1) & t
        while s:
            ss.append(s)
            ts.append(t)
            s = (s - 1) & t
    return np.array(ss, dtype=int), np.array(ts, dtype=int)


@lru_cache(maxsize=None)
def disjoint_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All unordered pairs of non-empty disjoint coalitions."""
    full = (1 << n) - 1
    ss, ts = [], []
    for s in range(1, full + 1):
        rest = full & ~s
        t = rest
        while t:
            if s < t:
                ss.append(s)
                ts.append(t)
            t = (t - 1) & rest
    return np.array(ss, dtype=int), np.array(ts, dtype=int)


def game_property_violations(v: CharacteristicFunction, tol: float = 1e-9) -> dict[str, list]:
    """Counterexamples to each structural property (empty lists when all hold)."""
    w = v.worth
    n = v.n_players
    out: dict[str, list] = {name: [] for name in GAME_PROPERTIES}
    neg = np.flatnonzero(w[1:] < -tol) + 1
    out["non_negativity"] = [int(s) for s in neg]
    if n >= 2:
        S, T = strict_subset_pairs(n)
        bad = w[S] > w[T] + tol
        out["monotonicity"] = list(zip(S[bad].tolist(), T[bad].tolist()))
        A, B = disjoint_pairs(n)
        bad = w[A | B] < w[A] + w[B] - tol
        out["super_additivity"] = list(zip(A[bad].tolist(), B[bad].tolist()))
    sizes = membership_matrix(n).sum(axis=1)[1:]
    per_capita = w[1:] / sizes
    bad = np.flatnonzero(per_capita > w[-1] / n + tol) + 1
    out["per_capita_balancedness"] = [int(s) for s in bad]
    return out


def solution_property_violations(v: CharacteristicFunction, grid: bool = False,
                                 grid_step: float = 1e-4) -> dict[str, list]:
    out: dict[str, list] = {name: [] for name in SOLUTION_PROPERTIES}
    vN = v.grand_worth
    phi = shapley(v).values
    if v.n_players <= 6:
        err = float(np.max(np.abs(phi - shapley_by_permutations(v))))
        if err > 1e-9:
            out["shapley_oracle"].append(err)
    try:
        nu = nucleolus(v).values
    except SolutionError as exc:
        out["nucleolus_core"].append(str(exc))
        return out
    check = core_contains(v, nu, tol=1e-7)
    if not check.contains:
        out["nucleolus_core"].append((check.worst_coalition, check.worst_violation))
    try:
        tau = tau_value(v).values
    except SolutionError as exc:
        out["efficiency"].append(("tau", str(exc)))
        tau = None
    for name, x in (("shapley", phi), ("nucleolus", nu), ("tau", tau)):
        if x is not None and abs(x.sum() - vN) > 1e-7:
            out["efficiency"].append((name, float(x.sum() - vN)))
    if grid and v.n_players == 3 and vN > 0:
        ref = nucleolus_grid_3p(v.scaled(1.0 / vN), step=grid_step)
        err = float(np.max(np.abs(nu / vN - ref)))
        if err > 2e-4:
            out["nucleolus_grid"].append(err)
    return out


@dataclass
class PropertyReport:
    n_instances: int
    seed: int
    checked: dict[str, int] = field(default_factory=dict)
    violations: dict[str, int] = field(default_factory=dict)
    counterexamples: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def lines(self) -> list[str]:
        out = []
        for name, count in self.checked.items():
            bad = self.violations.get(name, 0)
            status = "PASS" if bad == 0 else "FAIL"
            out.append(f"[{status}] {name}: {bad} violations in {count} instances")
        return out


def run_property_suite(n_instances: int, seed: int = 0, n_range=(2, 6), m_range=(1, 8),
                       gated: bool = True, solutions: bool = True, grid_checks: int = 0,
                       max_counterexamples: int = 5) -> PropertyReport:
    """Generate random instances and tally property violations.

    ``grid_checks`` bounds how many 3-player instances also go through the
    (slow) grid-search nucleolus oracle.
    """
    if n_instances < 1:
        raise ValueError("n_instances must be at least 1")
    rng = np.random.default_rng(seed)
    names = GAME_PROPERTIES + (SOLUTION_PROPERTIES if solutions else ())
    report = PropertyReport(n_instances, seed, {k: 0 for k in names}, {k: 0 for k in names})
    grid_left = grid_checks
    for _ in range(n_instances):
        inst = random_instance(rng, n_range, m_range)
        v = inst.game(gated)
        found = game_property_violations(v)
        if solutions:
            use_grid = grid_left > 0 and v.n_players == 3 and v.grand_worth > 0
            found.update(solution_property_violations(v, grid=use_grid))
            if use_grid:
                grid_left -= 1
                report.checked["nucleolus_grid"] += 1
        for name in names:
            if name == "nucleolus_grid":
                continue
            report.checked[name] += 1
        for name, items in found.items():
            if items:
                report.violations[name] += 1
                if len(report.counterexamples) < max_counterexamples:
                    report.counterexamples.append({
                        "property": name, "detail": repr(items[:3]),
                        "instance": inst.to_dict(), "worth": v.to_dict()})
    return report
