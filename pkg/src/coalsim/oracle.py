"""Exact ordered-sampling probabilities by dynamic programming.

Solves the finite-alleles recursion

    q(n) * n(n - 1 + mu) = sum_i n_i (n_i - 1) q(n - e_i)
                         + mu * sum_{i,j} n_i P[j][i] q(n - e_i + e_j)

level by level in the total count m = 1..n, with base case
q(single of type t) = pi_t.  Mutation terms couple configurations within
one level, so each level is a linear system: solved directly when small,
by damped fixed-point iteration otherwise.  Used as the independent
validation oracle for the Monte Carlo engine.
"""

import itertools
import math

import numpy as np

from .errors import InputError, NumericalError
from .model import Configuration, MutationModel, StationaryDistribution

CONFIG_GUARD = 1_000_000

# levels with at most this many configurations use a dense direct solve
_DIRECT_SOLVE_MAX_CONFIGS = 2000
_FIXED_POINT_TOL = 1e-12
_FIXED_POINT_CAP = 200_000
_FIXED_POINT_DAMPING = 0.5


def level_configurations(total: int, num_types: int) -> list[tuple[int, ...]]:
    """All count vectors of length num_types summing to total, in a fixed order."""
    configs = []
    for cuts in itertools.combinations(range(total + num_types - 1), num_types - 1):
        prev = -1
        parts = []
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(total + num_types - 2 - prev)
        configs.append(tuple(parts))
    return configs


def _check_guard(total: int, num_types: int) -> None:
    count = math.comb(total + num_types - 1, num_types - 1)
    if count > CONFIG_GUARD:
        raise InputError(
            f"exact solve refused: level {total} has {count} configurations "
            f"(guard is {CONFIG_GUARD})"
        )


def _solve_level(
    m: int,
    configs: list[tuple[int, ...]],
    index: dict[tuple[int, ...], int],
    prev: dict[tuple[int, ...], float],
    P: np.ndarray,
    mu: float,
) -> np.ndarray:
    K = P.shape[0]
    ncfg = len(configs)
    d = float(m) * (float(m - 1) + mu)

    b = np.zeros(ncfg)
    couplings: list[list[tuple[int, float]]] = [[] for _ in range(ncfg)]
    for r, cfg in enumerate(configs):
        for i in range(K):
            ni = cfg[i]
            if ni == 0:
                continue
            if ni >= 2:
                down = list(cfg)
                down[i] -= 1
                b[r] += ni * (ni - 1) * prev[tuple(down)]
            for j in range(K):
                pji = P[j, i]
                if pji == 0.0:
                    continue
                moved = list(cfg)
                moved[i] -= 1
                moved[j] += 1
                couplings[r].append((index[tuple(moved)], mu * ni * pji))

    if ncfg <= _DIRECT_SOLVE_MAX_CONFIGS:
        A = np.zeros((ncfg, ncfg))
        np.fill_diagonal(A, d)
        for r, terms in enumerate(couplings):
            for c, coeff in terms:
                A[r, c] -= coeff
        return np.linalg.solve(A, b)

    # damped fixed point q <- (b + M q) / d
    q = b / d
    residual = np.inf
    for _ in range(_FIXED_POINT_CAP):
        mq = np.zeros(ncfg)
        for r, terms in enumerate(couplings):
            acc = 0.0
            for c, coeff in terms:
                acc += coeff * q[c]
            mq[r] = acc
        new = (b + mq) / d
        residual = float(np.max(np.abs(new - q)))
        q = _FIXED_POINT_DAMPING * q + (1.0 - _FIXED_POINT_DAMPING) * new
        if residual <= _FIXED_POINT_TOL:
            return q
    raise NumericalError(
        f"level {m} fixed point did not converge: residual {residual:.3e} "
        f"(target {_FIXED_POINT_TOL:.1e})"
    )


def exact_table(
    model: MutationModel, dist: StationaryDistribution, total: int
) -> dict[int, dict[tuple[int, ...], float]]:
    """q(n) for every configuration at every level 1..total."""
    if total < 1:
        raise InputError("total must be at least 1")
    K = model.num_types
    _check_guard(total, K)
    P = model.transition
    mu = model.mu

    levels: dict[int, dict[tuple[int, ...], float]] = {}
    base = {}
    for t in range(K):
        single = tuple(1 if i == t else 0 for i in range(K))
        base[single] = float(dist.probs[t])
    levels[1] = base

    for m in range(2, total + 1):
        configs = level_configurations(m, K)
        index = {cfg: r for r, cfg in enumerate(configs)}
        q = _solve_level(m, configs, index, levels[m - 1], P, mu)
        levels[m] = {cfg: float(q[r]) for r, cfg in enumerate(configs)}
    return levels


def exact_likelihood(
    initial: Configuration, model: MutationModel, dist: StationaryDistribution
) -> float:
    """Log ordered sampling probability of the initial configuration."""
    if initial.counts.size != model.num_types:
        raise InputError("population and model have different numbers of types")
    levels = exact_table(model, dist, initial.total)
    q = levels[initial.total][tuple(int(c) for c in initial.counts)]
    if not q > 0.0:
        raise NumericalError(f"exact solve produced a non-positive probability {q!r}")
    return math.log(q)


def multinomial_coefficient(cfg: tuple[int, ...]) -> int:
    total = sum(cfg)
    coeff = 1
    remaining = total
    for c in cfg:
        coeff *= math.comb(remaining, c)
        remaining -= c
    return coeff


def level_normalisation(
    model: MutationModel, dist: StationaryDistribution, total: int
) -> float:
    """sum over level-``total`` configurations of multinomial(cfg) * q(cfg).

    Equals 1 by exchangeability; used as an independent consistency check.
    """
    levels = exact_table(model, dist, total)
    return float(
        sum(multinomial_coefficient(cfg) * q for cfg, q in levels[total].items())
    )
