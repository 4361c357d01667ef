"""Least-core quantities at a fixed allocation.

The deficit of coalition ``C`` under allocation ``x`` is
``v(C) - sum_{i in C} x_i``.  At a fixed ``x`` the least-core subsidy is the
largest deficit over proper, non-empty coalitions, so no LP solver is needed:
exact values come from enumeration and estimates from uniform sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import CapacityError, DomainError
from .game import (
    MAX_BRUTEFORCE_PLAYERS,
    MAX_INT64_PLAYERS,
    Allocation,
    CgaModel,
    Game,
    all_masks,
    membership,
)

MAX_IMPROVE_PLAYERS = 12
EFFICIENCY_TOL = 1e-6


@dataclass(frozen=True)
class SampleBudget:
    """How many coalitions to sample.

    ``delta`` is the tolerated fraction of coalitions whose deficit may exceed
    the estimate and ``failure_prob`` the chance that even this fails.
    """

    delta: float
    failure_prob: float
    m: int
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("sample budget m must be at least 1")
        if not (0 < self.delta < 1 and 0 < self.failure_prob < 1):
            raise DomainError("delta and failure_prob must lie in (0, 1)")

    @classmethod
    def from_confidence(cls, delta: float, failure_prob: float, seed: int = 0,
                        constant: float = 8.0) -> "SampleBudget":
        """``m = ceil(constant * ln(1 / failure_prob) / delta**2)``."""
        m = math.ceil(constant * math.log(1.0 / failure_prob) / delta**2)
        return cls(delta, failure_prob, m, seed)


@dataclass(frozen=True, eq=False)
class LeastCoreEstimate:
    allocation: Allocation
    e_hat: float
    samples_used: int
    seed: int
    coalition: int
    evaluated_on: str

    def to_dict(self) -> dict:
        return {
            "allocation": self.allocation.as_dict(), "e_hat": self.e_hat,
            "samples_used": self.samples_used, "seed": self.seed,
            "coalition": self.allocation.universe.players(self.coalition),
            "evaluated_on": self.evaluated_on,
        }


class MaxDeficit(NamedTuple):
    value: float
    coalition: int
    efficiency_gap: float
    efficiency_warning: bool


def coalition_payoffs(x: Allocation, masks: np.ndarray) -> np.ndarray:
    return membership(masks, x.universe.n) @ x.payoffs


def deficits(game: Union[Game, CgaModel], x: Allocation, masks) -> np.ndarray:
    return np.asarray(game.evaluate(masks), dtype=np.float64) - coalition_payoffs(x, masks)


def _check(game, x: Allocation):
    if game.universe.n != x.universe.n:
        raise DomainError("allocation and game must share a universe")


def sampled_least_core_value(game: Union[Game, CgaModel], x: Allocation,
                             budget: SampleBudget) -> LeastCoreEstimate:
    """Largest deficit over ``budget.m`` uniformly drawn coalitions.

    Only proper, non-empty draws enter the maximum; the empty coalition is
    the fallback when no such draw occurs.  With ``m >= 2**n`` every
    coalition is enumerated instead of sampled.
    """
    _check(game, x)
    n = x.universe.n
    if n > MAX_INT64_PLAYERS:
        raise CapacityError(f"uniform coalition sampling is limited to n <= {MAX_INT64_PLAYERS}")
    grand = (1 << n) - 1
    if n <= MAX_BRUTEFORCE_PLAYERS and budget.m >= 1 << n:
        drawn = all_masks(n)
    else:
        rng = np.random.default_rng(budget.seed)
        drawn = rng.integers(0, 1 << n, size=budget.m, dtype=np.int64)
    proper = drawn[(drawn != 0) & (drawn != grand)]
    if proper.size == 0:
        e_hat, best = float(game.evaluate(np.zeros(1, np.int64))[0]), 0
    else:
        d = deficits(game, x, proper)
        j = int(np.argmax(d))
        e_hat, best = float(d[j]), int(proper[j])
    kind = "game" if isinstance(game, Game) else "model"
    return LeastCoreEstimate(x, e_hat, int(drawn.size), budget.seed, best, kind)


def exact_max_deficit(g: Union[Game, CgaModel], x: Allocation) -> MaxDeficit:
    """Largest deficit over every proper, non-empty coalition (not clamped at 0)."""
    _check(g, x)
    n = x.universe.n
    if n > MAX_BRUTEFORCE_PLAYERS:
        raise CapacityError(f"exact deficit scan is limited to n <= {MAX_BRUTEFORCE_PLAYERS}")
    if n < 2:
        raise DomainError("a game needs at least two players to have proper coalitions")
    masks = all_masks(n)[1:-1]
    d = deficits(g, x, masks)
    j = int(np.argmax(d))
    grand = (1 << n) - 1
    gap = float(x.payoffs.sum() - g.evaluate(np.array([grand]))[0])
    return MaxDeficit(float(d[j]), int(masks[j]), gap, abs(gap) > EFFICIENCY_TOL)


def exceedance_fraction(g: Union[Game, CgaModel], x: Allocation, e: float) -> float:
    """Share of all coalitions whose deficit is strictly above ``e``."""
    n = x.universe.n
    if n > MAX_BRUTEFORCE_PLAYERS:
        raise CapacityError(f"exceedance scan is limited to n <= {MAX_BRUTEFORCE_PLAYERS}")
    return float((deficits(g, x, all_masks(n)) > e).mean())


def improve_allocation(g: Union[Game, CgaModel], x0: Allocation, steps: int = 10_000,
                       step_size: float = 0.1, seed: int = 0) -> Allocation:
    """Projected subgradient descent on the max deficit over ``sum(x) = v(A)``.

    Step ``t`` has length ``step_size / sqrt(t + 1)``; ties between maximal
    coalitions are broken at random.  Returns the best iterate seen, which is
    ``x0`` itself if nothing improves on it.
    """
    _check(g, x0)
    n = x0.universe.n
    if n > MAX_IMPROVE_PLAYERS:
        raise CapacityError(f"allocation improvement is limited to n <= {MAX_IMPROVE_PLAYERS}")
    if n < 2:
        return x0
    masks = all_masks(n)[1:-1]
    values = np.asarray(g.evaluate(masks), dtype=np.float64)
    bits = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(np.float64)
    grand_value = float(g.evaluate(np.array([(1 << n) - 1]))[0])
    rng = np.random.default_rng(seed)

    best_x = np.array(x0.payoffs)
    best_f = float((values - bits @ best_x).max())
    x = best_x + (grand_value - best_x.sum()) / n
    for t in range(steps):
        d = values - bits @ x
        f = d.max()
        if f < best_f:
            best_f, best_x = float(f), x.copy()
        ties = np.flatnonzero(d >= f - 1e-12)
        j = ties[rng.integers(ties.size)] if ties.size > 1 else ties[0]
        sub = -bits[j]
        sub -= sub.mean()
        norm = np.linalg.norm(sub)
        if norm == 0.0:
            break
        x = x - step_size / math.sqrt(t + 1) * sub / norm
    f = float((values - bits @ x).max())
    if f < best_f:
        best_x = x
    return Allocation(x0.universe, best_x)
