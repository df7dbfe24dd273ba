"""One-point solutions of TU games: Shapley value, tau-value and nucleolus."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import CharacteristicFunction, membership_matrix
from .simplex import LPError, simplex

RAW = "raw"
NORMALIZED = "normalized"
SOLUTIONS = ("shapley", "tau", "nucleolus")


class SolutionError(ValueError):
    pass


class NotQuasiBalanced(SolutionError):
    pass


class EmptyImputationSet(SolutionError):
    pass


@dataclass
class PayoffVector:
    values: np.ndarray
    kind: str = RAW

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in (RAW, NORMALIZED):
            raise ValueError(f"unknown payoff kind {self.kind!r}")

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def tolist(self) -> list[float]:
        return [float(x) for x in self.values]


def excess(v: CharacteristicFunction, x, coalition: int) -> float:
    x = np.asarray(x, dtype=float)
    idx = [i for i in range(v.n_players) if coalition >> i & 1]
    return v(coalition) - float(x[idx].sum())


def excess_profile(v: CharacteristicFunction, x) -> dict[int, float]:
    """Excess of every proper non-empty coalition."""
    x = np.asarray(x, dtype=float)
    mem = membership_matrix(v.n_players)[1:-1]
    ex = v.worth[1:-1] - mem @ x
    return {s: float(e) for s, e in zip(range(1, v.grand), ex)}


def sorted_excesses(v: CharacteristicFunction, x) -> np.ndarray:
    """Proper-coalition excesses in non-increasing order."""
    return np.sort(np.array(list(excess_profile(v, x).values())))[::-1]


def shapley(v: CharacteristicFunction) -> PayoffVector:
    n = v.n_players
    mem = membership_matrix(n)
    sizes = mem.sum(axis=1)
    weight = np.array([math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n)
                       if s < n else 0.0 for s in range(n + 1)])
    masks = np.arange(1 << n)
    phi = np.empty(n)
    for i in range(n):
        without = masks[~mem[:, i]]
        gains = v.worth[without | (1 << i)] - v.worth[without]
        phi[i] = float(weight[sizes[without]] @ gains)
    return PayoffVector(phi)


def utopia_and_minimal_rights(v: CharacteristicFunction) -> tuple[np.ndarray, np.ndarray]:
    n = v.n_players
    grand = v.grand
    M = np.array([v.grand_worth - v(grand & ~(1 << i)) for i in range(n)])
    mem = membership_matrix(n)
    # v(S) - M(S) + M_i for every S containing i
    slack = v.worth - mem @ M
    m = np.array([float((slack[mem[:, i]] + M[i]).max()) for i in range(n)])
    return M, m


def tau_value(v: CharacteristicFunction, tol: float = 1e-9) -> PayoffVector:
    M, m = utopia_and_minimal_rights(v)
    vN = v.grand_worth
    scale = tol * max(1.0, abs(vN))
    if np.any(m > M + scale) or m.sum() > vN + scale or vN > M.sum() + scale:
        raise NotQuasiBalanced(f"game is not quasi-balanced (M={M.tolist()}, m={m.tolist()})")
    gap = (M - m).sum()
    if gap <= scale:
        return PayoffVector(M.copy())
    alpha = (vN - m.sum()) / gap
    return PayoffVector(m + alpha * (M - m))


def _affine_solutions(F: np.ndarray, f: np.ndarray, rtol: float = 1e-10):
    """Particular solution and null-space basis of F @ x == f."""
    x0, *_ = np.linalg.lstsq(F, f, rcond=None)
    _, sv, vt = np.linalg.svd(F)
    rank = int((sv > rtol * max(1.0, sv.max(initial=0.0))).sum())
    return x0, vt[rank:].T


def nucleolus(v: CharacteristicFunction, tol: float = 1e-7, max_stages: int | None = None,
              return_stages: bool = False):
    """Nucleolus by the sequential LP scheme.

    Each stage minimises the largest excess over the coalitions not yet fixed,
    restricted to imputations satisfying the equalities fixed so far. The LP is
    solved in dual form over an affine parametrisation of that set; coalitions
    carrying a positive dual weight are binding at every optimum and get fixed.
    Stops once the payoff is pinned down.
    """
    n = v.n_players
    vN = v.grand_worth
    if n == 1:
        return PayoffVector([vN])
    singles = np.array([v(1 << i) for i in range(n)])
    scale = max(1.0, float(np.abs(v.worth).max()))
    if singles.sum() > vN + tol * scale:
        raise EmptyImputationSet(f"sum of singleton worths {singles.sum():.6g} exceeds v(N)={vN:.6g}")

    mem = membership_matrix(n).astype(float)
    proper = list(range(1, v.grand))
    free = set(proper)
    eq_rows = [np.ones(n)]
    eq_rhs = [vN]
    bounds = set(range(n))  # individual-rationality constraints still active
    stages = []
    max_stages = max_stages if max_stages is not None else 2 * len(proper) + n + 1

    for _ in range(max_stages):
        x0, Z = _affine_solutions(np.array(eq_rows), np.array(eq_rhs))
        k = Z.shape[1]
        if k == 0:
            break
        cols = sorted(free)
        AZ = mem[cols] @ Z
        live = np.linalg.norm(AZ, axis=1) > 1e-10
        cols = [s for s, keep in zip(cols, live) if keep]
        free = set(cols)
        AZ = AZ[live]
        b = v.worth[cols] - mem[cols] @ x0
        bnd = sorted(i for i in bounds if np.linalg.norm(Z[i]) > 1e-10)
        bounds = set(bnd)
        IZ = Z[bnd]
        d = singles[bnd] - x0[bnd]

        # dual: max b.lam + d.mu  s.t.  AZ^T lam + IZ^T mu = 0,  sum(lam) = 1
        n_lam, n_mu = len(cols), len(bnd)
        A = np.zeros((k + 1, n_lam + n_mu))
        A[:k, :n_lam] = AZ.T
        A[:k, n_lam:] = IZ.T
        A[k, :n_lam] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        try:
            res = simplex(-np.concatenate([b, d]), A, rhs)
        except LPError as exc:
            raise SolutionError(f"nucleolus LP failed: {exc}") from exc
        t_star = -res.objective
        lam, mu = res.x[:n_lam], res.x[n_lam:]
        binding = [s for s, w in zip(cols, lam) if w > tol]
        stages.append((t_star, binding))
        for s in binding:
            eq_rows.append(mem[s])
            eq_rhs.append(v(s) - t_star)
            free.discard(s)
        for i, w in zip(bnd, mu):
            if w > tol:
                row = np.zeros(n)
                row[i] = 1.0
                eq_rows.append(row)
                eq_rhs.append(singles[i])
                bounds.discard(i)
    else:
        raise SolutionError(f"nucleolus not pinned down after {max_stages} stages")

    result = PayoffVector(x0)
    return (result, stages) if return_stages else result


@dataclass
class CoreCheck:
    contains: bool
    worst_coalition: int | None
    worst_violation: float
    violated: tuple[int, ...] = ()

    def __bool__(self):
        return self.contains


def core_contains(v: CharacteristicFunction, x, tol: float = 1e-7) -> CoreCheck:
    """Core membership; reports the coalition with the largest excess if violated.

    Coalition 0 stands for the efficiency condition.
    """
    x = np.asarray(x, dtype=float)
    mem = membership_matrix(v.n_players)[1:]
    ex = v.worth[1:] - mem @ x
    proper_ex = ex[:-1]
    eff_gap = abs(float(ex[-1]))
    worst = int(np.argmax(proper_ex)) + 1 if proper_ex.size else None
    worst_val = float(proper_ex.max()) if proper_ex.size else 0.0
    violated = tuple(int(s) + 1 for s in np.flatnonzero(proper_ex > tol))
    if eff_gap > tol:
        return CoreCheck(False, 0 if worst_val <= tol else worst, max(worst_val, eff_gap),
                         violated)
    if worst_val > tol:
        return CoreCheck(False, worst, worst_val, violated)
    return CoreCheck(True, None, worst_val)


def normalize_100(x) -> PayoffVector:
    values = np.asarray(x, dtype=float)
    if np.any(values < 0):
        raise ValueError("payoffs must be non-negative to normalise")
    total = values.sum()
    if total <= 0:
        raise ValueError("cannot normalise an all-zero payoff vector")
    return PayoffVector(values * (100.0 / total), NORMALIZED)


def solve(v: CharacteristicFunction, method: str) -> PayoffVector:
    if method == "shapley":
        return shapley(v)
    if method == "tau":
        return tau_value(v)
    if method == "nucleolus":
        return nucleolus(v)
    raise ValueError(f"unknown solution concept {method!r}; expected one of {SOLUTIONS}")
