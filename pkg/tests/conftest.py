"""Independent reference implementations used as test oracles.

These deliberately avoid the fast transforms and closed forms in the
package: they enumerate subsets or permutations directly.
"""

import itertools
import math

import numpy as np
import pytest

from cgakit.game import Game, PlayerUniverse


def submasks(c):
    """Every subset of mask ``c`` (including 0 and ``c``)."""
    sub = c
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & c


def oracle_eval(weights: dict, c: int) -> float:
    return sum(weights.get(s, 0.0) for s in submasks(c) if s)


def oracle_weights(values, n):
    """Interaction weights by increasing subset size, straight from the recursion."""
    omega = {}
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            s = sum(1 << i for i in combo)
            omega[s] = values[s] - sum(omega[t] for t in submasks(s) if t and t != s)
    return omega


def oracle_shapley_permutations(values, n):
    """Average marginal contribution over all n! arrival orders."""
    phi = np.zeros(n)
    for perm in itertools.permutations(range(n)):
        mask = 0
        for i in perm:
            phi[i] += values[mask | (1 << i)] - values[mask]
            mask |= 1 << i
    return phi / math.factorial(n)


def random_game(n, seed, empty_zero=True):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=1 << n)
    if empty_zero:
        v[0] = 0.0
    return Game(PlayerUniverse.of_size(n), v)


@pytest.fixture
def majority3():
    u = PlayerUniverse(("a", "b", "c"))
    return Game.from_function(u, lambda m: 1.0 if bin(m).count("1") >= 2 else 0.0)


def oracle_rank_fraction(matrix):
    """Rational rank by Gauss-Jordan elimination over ``fractions.Fraction``."""
    from fractions import Fraction

    rows = [[Fraction(int(x)) for x in r] for r in matrix]
    rank = 0
    ncol = len(rows[0]) if rows else 0
    for c in range(ncol):
        piv = next((r for r in range(rank, len(rows)) if rows[r][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][c] != 0:
                f = rows[r][c] / rows[rank][c]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank
