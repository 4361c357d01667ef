"""Task drivers: team completion, team percentiles and synthetic data generation."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, islice
from math import comb
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import CapacityError, DomainError
from .estimation import PerformanceDataset
from .formats import write_model_json, write_performance_csv
from .game import (
    MAX_DENSE_PLAYERS,
    CgaModel,
    mask_array,
    mask_from_indices,
    masks_of_size,
    members,
    popcount,
    random_cga,
)
from .identification import sufficient_size_sets

MAX_COMPLETIONS = 10_000_000
_CHUNK = 200_000


@dataclass(frozen=True)
class CompletionQuery:
    """Add ``slots`` players from ``pool`` to ``base`` so the team scores highest."""

    model: object
    base: int
    slots: int
    pool: int

    def __post_init__(self):
        if self.slots < 1:
            raise DomainError("slots must be at least 1")
        if self.base & self.pool:
            raise DomainError("pool must be disjoint from the base team")
        if popcount(self.pool) < self.slots:
            raise DomainError("pool has fewer candidates than slots")


def best_completion(q: CompletionQuery) -> tuple[int, float]:
    """Exhaustive search over every ``slots``-subset of the pool.

    Ties go to the smallest coalition mask.
    """
    pool = members(q.pool)
    count = comb(len(pool), q.slots)
    if count > MAX_COMPLETIONS:
        raise CapacityError(f"{count} candidate completions exceed the limit of {MAX_COMPLETIONS}")
    best_mask, best_score = None, -np.inf
    combos = combinations(pool, q.slots)
    while True:
        chunk = mask_array([q.base | mask_from_indices(c) for c in islice(combos, _CHUNK)],
                           q.model.universe.n)
        if chunk.size == 0:
            break
        scores = np.asarray(q.model.evaluate(chunk), dtype=np.float64)
        top = scores.max()
        cand = chunk[scores == top].min()
        if top > best_score or (top == best_score and cand < best_mask):
            best_mask, best_score = int(cand), float(top)
    return best_mask, best_score


def score_team_percentile(model, team: int, random_teams: int, team_size: int, seed: int) -> float:
    """Fraction of random teams of ``team_size`` that score strictly below ``team``.

    The comparison teams are distinct from each other and from ``team``.
    When fewer such teams exist than requested, all of them are used.
    """
    n = model.universe.n
    if not 1 <= team_size <= n:
        raise DomainError(f"team_size must lie in [1, {n}]")
    if random_teams < 1:
        raise DomainError("random_teams must be at least 1")
    team = model.universe.check(team)
    available = comb(n, team_size) - (1 if popcount(team) == team_size else 0)
    if available == 0:
        raise DomainError("no other team of that size exists")
    if random_teams >= available:
        if n > MAX_DENSE_PLAYERS:
            raise CapacityError("too many candidate teams to enumerate")
        teams = masks_of_size(n, team_size)
        teams = teams[teams != team]
    else:
        rng = np.random.default_rng(seed)
        seen: set[int] = set()
        picked = []
        while len(picked) < random_teams:
            m = mask_from_indices(rng.choice(n, size=team_size, replace=False))
            if m != team and m not in seen:
                seen.add(m)
                picked.append(m)
        teams = mask_array(picked, n)
    target = float(np.asarray(model.evaluate(mask_array([team], n)))[0])
    scores = np.asarray(model.evaluate(teams), dtype=np.float64)
    return float((scores < target).mean())


def default_sizes(n: int, k: int) -> tuple[int, ...]:
    """Smallest ``k`` sizes in ``[k, n - 1]``, or every size when there are too few."""
    choices = sufficient_size_sets(n, k)
    return choices[0] if choices else tuple(range(1, n + 1))


def simulate_game(n: int, k: int, seed: int, noise_sd: float, out_path,
                  sizes: Optional[Sequence[int]] = None, weight_scale: float = 1.0,
                  repeats: int = 1, samples_per_size: Optional[int] = None):
    """Write a synthetic performance CSV and the generating model next to it.

    The model is ``random_cga(n, k, seed, weight_scale)``.  Every coalition
    of the requested sizes is observed ``repeats`` times (or
    ``samples_per_size`` random ones per size), each with independent
    Gaussian noise of standard deviation ``noise_sd``.  Returns
    ``(csv_path, model_path)``; the model goes to ``<stem>.model.json``.
    """
    if noise_sd < 0:
        raise DomainError("noise_sd must be non-negative")
    if repeats < 1:
        raise DomainError("repeats must be at least 1")
    model = random_cga(n, k, seed, weight_scale)
    sizes = tuple(sorted(set(sizes))) if sizes is not None else default_sizes(n, k)
    rng = np.random.default_rng([seed, 1])
    parts = []
    for s in sizes:
        if not 0 <= s <= n:
            raise DomainError(f"coalition size {s} outside [0, {n}]")
        if samples_per_size is not None and samples_per_size < comb(n, s):
            picks = {mask_from_indices(rng.choice(n, size=s, replace=False))
                     for _ in range(samples_per_size)}
            parts.append(np.array(sorted(picks), dtype=np.int64))
        else:
            parts.append(masks_of_size(n, s))
    coalitions = np.repeat(np.concatenate(parts), repeats)
    values = model.evaluate(coalitions)
    if noise_sd > 0:
        values = values + rng.normal(0.0, noise_sd, values.size)
    out_path = Path(out_path)
    model_path = out_path.with_name(out_path.stem + ".model.json")
    model = CgaModel(model.universe, model.order, model.masks, model.values,
                     {"generator": "random_cga", "seed": seed, "weight_scale": weight_scale,
                      "noise_sd": noise_sd, "sizes": list(sizes), "repeats": repeats})
    write_performance_csv(PerformanceDataset(model.universe, coalitions, values), out_path)
    write_model_json(model, model_path)
    return out_path, model_path
