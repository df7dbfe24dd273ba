"""Brute-force reference computations used to cross-check the fast solvers."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .game import CharacteristicFunction


def shapley_by_permutations(v: CharacteristicFunction) -> np.ndarray:
    """Average marginal contribution over every ordering of the players."""
    n = v.n_players
    phi = np.zeros(n)
    for order in itertools.permutations(range(n)):
        coalition = 0
        for i in order:
            phi[i] += v.worth[coalition | (1 << i)] - v.worth[coalition]
            coalition |= 1 << i
    return phi / math.factorial(n)


def nucleolus_grid_3p(v: CharacteristicFunction, step: float = 1e-4) -> np.ndarray:
    """Nucleolus of a 3-player game by exhaustive search of the imputation simplex.

    Grid points split the surplus v(N) - sum v(i) in multiples of ``step``; the
    point whose non-increasing excess vector is lexicographically smallest wins.
    In a 3-player imputation every excess depends on one coordinate only
    (singleton {i} on x_i, pair N\\{i} on x_i through efficiency), so excesses
    are tabulated per integer coordinate and ties compare bit-exactly. The
    search first keeps every point attaining the smallest maximum excess, then
    ranks those candidates by their full sorted excess vectors.
    """
    if v.n_players != 3:
        raise ValueError("grid oracle handles 3-player games only")
    K = int(round(1.0 / step))
    w = v.worth
    single = np.array([w[1], w[2], w[4]])
    complement = np.array([w[6], w[5], w[3]])
    vN = w[7]
    surplus = vN - single.sum()
    if surplus < -1e-12:
        raise ValueError("imputation set is empty")
    surplus = max(surplus, 0.0)

    k = np.arange(K + 1)
    x = single[:, None] + surplus * (k[None, :] / K)
    ex_single = single[:, None] - x
    ex_pair = complement[:, None] - (vN - x)
    top = np.maximum(ex_single, ex_pair)

    # row i: the largest excess at (i, j, K-i-j) is max(top0[i], top1[j], top2[K-i-j])
    row_best = np.empty(K + 1)
    for i in range(K + 1):
        inner = np.maximum(top[1][:K - i + 1], top[2][K - i::-1])
        row_best[i] = max(top[0][i], inner.min())
    best = row_best.min()
    cand_i, cand_j = [], []
    for i in np.flatnonzero(row_best == best):
        inner = np.maximum(np.maximum(top[1][:K - i + 1], top[2][K - i::-1]), top[0][i])
        jj = np.flatnonzero(inner == best)
        cand_i.append(np.full(len(jj), i))
        cand_j.append(jj)
    ci = np.concatenate(cand_i)
    cj = np.concatenate(cand_j)
    ck = K - ci - cj
    E = np.stack([ex_single[0][ci], ex_pair[0][ci], ex_single[1][cj], ex_pair[1][cj],
                  ex_single[2][ck], ex_pair[2][ck]], axis=1)
    E = -np.sort(-E, axis=1)
    idx = np.lexsort(E.T[::-1])[0]
    return x[[0, 1, 2], [ci[idx], cj[idx], ck[idx]]]
