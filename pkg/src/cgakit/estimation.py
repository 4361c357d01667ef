"""Fitting CGA models from coalition values or from team matchups.

Three estimators are provided:

* ``fit_least_squares`` -- ridge / minimum-norm least squares on the design
  matrix (exact ERM for order-k models);
* ``fit_lowrank_pairwise`` -- ``v(C) = w.x_C + x_C^T F G^T x_C`` on one-hot
  team encodings, trained by mini-batch gradient descent;
* ``fit_bradley_terry`` -- order-1 or order-2 weights trained on win/loss
  outcomes with a logistic link on the score difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, DomainError, NumericalError
from .game import (
    CgaModel,
    PlayerUniverse,
    canonical_columns,
    mask_array,
    members,
    membership,
    popcount,
    subset_indicator,
)
from .identification import MAX_DESIGN_PLAYERS, numerical_rank


@dataclass(frozen=True, eq=False)
class PerformanceDataset:
    """Observed ``(coalition, value)`` pairs."""

    universe: PlayerUniverse
    coalitions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        c = mask_array(self.coalitions, self.universe.n)
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if c.shape != v.shape:
            raise DomainError("coalitions and values must have the same length")
        if c.size and (c.min() < 0 or (c >> self.universe.n).any()):
            raise DomainError("coalition outside the dataset's universe")
        object.__setattr__(self, "coalitions", c)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.coalitions.size

    def subset(self, idx) -> "PerformanceDataset":
        return PerformanceDataset(self.universe, self.coalitions[idx], self.values[idx])


@dataclass(frozen=True, eq=False)
class MatchupDataset:
    """Observed matchups: ``a_won[i]`` is True when ``team_a[i]`` beat ``team_b[i]``."""

    universe: PlayerUniverse
    team_a: np.ndarray
    team_b: np.ndarray
    a_won: np.ndarray

    def __post_init__(self):
        a = mask_array(self.team_a, self.universe.n)
        b = mask_array(self.team_b, self.universe.n)
        y = np.asarray(self.a_won, dtype=bool).reshape(-1)
        if not a.shape == b.shape == y.shape:
            raise DomainError("team_a, team_b and a_won must have the same length")
        if a.size:
            if (a & b).any():
                raise DomainError(f"teams overlap in row {int(np.flatnonzero(a & b)[0])}")
            if (a == 0).any() or (b == 0).any():
                raise DomainError("teams must be non-empty")
            if ((a | b) >> self.universe.n).any():
                raise DomainError("team outside the dataset's universe")
        object.__setattr__(self, "team_a", a)
        object.__setattr__(self, "team_b", b)
        object.__setattr__(self, "a_won", y)

    def __len__(self):
        return self.team_a.size

    def subset(self, idx) -> "MatchupDataset":
        return MatchupDataset(self.universe, self.team_a[idx], self.team_b[idx], self.a_won[idx])


@dataclass(frozen=True)
class FitConfig:
    l2: float = 0.0
    rank: int = 1
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.l2 < 0:
            raise DomainError("l2 must be non-negative")
        if self.learning_rate <= 0:
            raise DomainError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise DomainError("epochs and batch_size must be at least 1")
        if self.rank < 1:
            raise DomainError("rank must be at least 1")


@dataclass(frozen=True, eq=False)
class LowRankPairwiseModel:
    """``v(C) = sum_{i in C} w_i + sum_{i, j in C} (F G^T)_{ij}``."""

    universe: PlayerUniverse
    w: np.ndarray
    factors_left: np.ndarray
    factors_right: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.universe.n
        w = np.asarray(self.w, dtype=np.float64)
        f = np.asarray(self.factors_left, dtype=np.float64)
        g = np.asarray(self.factors_right, dtype=np.float64)
        if w.shape != (n,) or f.ndim != 2 or f.shape[0] != n or f.shape != g.shape:
            raise DomainError("w must have n entries and both factors shape (n, r)")
        if f.shape[1] > n:
            raise DomainError("factor rank cannot exceed n")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "factors_left", f)
        object.__setattr__(self, "factors_right", g)

    @property
    def rank(self) -> int:
        return self.factors_left.shape[1]

    @property
    def interaction(self) -> np.ndarray:
        return self.factors_left @ self.factors_right.T

    def evaluate(self, coalitions) -> np.ndarray:
        x = one_hot(coalitions, self.universe.n)
        return _lowrank_predict(x, self.w, self.factors_left, self.factors_right)


def one_hot(coalitions, n: int) -> np.ndarray:
    return membership(mask_array(coalitions, n), n)


def split_dataset(data, fractions: Sequence[float], seed: int = 0) -> list:
    """Seeded random split into consecutive parts with the given fractions."""
    fr = np.asarray(fractions, dtype=np.float64)
    if np.any(fr < 0) or not np.isclose(fr.sum(), 1.0):
        raise DomainError("fractions must be non-negative and sum to 1")
    perm = np.random.default_rng(seed).permutation(len(data))
    cuts = np.round(np.cumsum(fr)[:-1] * len(data)).astype(int)
    return [data.subset(np.sort(part)) for part in np.split(perm, cuts)]


# least squares ----------------------------------------------------------------

def least_squares_loss(omega, design, y, l2):
    """Squared error plus ridge penalty, with its gradient in ``omega``."""
    r = design @ omega - y
    return float(r @ r + l2 * omega @ omega), 2.0 * design.T @ r + 2.0 * l2 * omega


def fit_least_squares(data: PerformanceDataset, k: int, l2: float = 0.0) -> CgaModel:
    """ERM over order-``k`` weights: ``sum (vhat(C) - v(C))^2 + l2 ||omega||^2``.

    Without regularisation the minimum-norm solution is returned and
    ``meta["identified"]`` says whether it is the unique minimiser.
    """
    n = data.universe.n
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n > MAX_DESIGN_PLAYERS:
        raise CapacityError(f"dense least squares is limited to n <= {MAX_DESIGN_PLAYERS}")
    if len(data) == 0:
        raise DomainError("cannot fit an empty dataset")
    if l2 < 0:
        raise DomainError("l2 must be non-negative")
    cols = canonical_columns(n, k)
    design = subset_indicator(data.coalitions, cols)
    rank = numerical_rank(design)
    if l2 == 0.0:
        omega = np.linalg.lstsq(design, data.values, rcond=None)[0]
    else:
        omega = np.linalg.solve(design.T @ design + l2 * np.eye(cols.size), design.T @ data.values)
    resid = design @ omega - data.values
    meta = {
        "method": "least_squares", "l2": l2, "rank": rank, "column_count": int(cols.size),
        "identified": bool(rank == cols.size), "train_mse": float(resid @ resid / resid.size),
        "loss": float(resid @ resid + l2 * omega @ omega),
    }
    return CgaModel(data.universe, k, cols, omega, meta)


# low-rank pairwise ------------------------------------------------------------

def _lowrank_predict(x, w, f, g):
    return x @ w + ((x @ f) * (x @ g)).sum(axis=1)


def lowrank_loss(params, x, y, l2):
    """Mean squared error plus weight decay; returns (loss, (dw, dF, dG))."""
    w, f, g = params
    xf, xg = x @ f, x @ g
    r = x @ w + (xf * xg).sum(axis=1) - y
    m = y.size
    loss = float(r @ r / m + l2 * (w @ w + (f * f).sum() + (g * g).sum()))
    dw = 2.0 * x.T @ r / m + 2.0 * l2 * w
    df = 2.0 * x.T @ (r[:, None] * xg) / m + 2.0 * l2 * f
    dg = 2.0 * x.T @ (r[:, None] * xf) / m + 2.0 * l2 * g
    return loss, (dw, df, dg)


def _streams(seed: int):
    init, shuffle = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init), np.random.default_rng(shuffle)


def fit_lowrank_pairwise(data: PerformanceDataset, cfg: FitConfig) -> LowRankPairwiseModel:
    """Mini-batch gradient descent on the low-rank pairwise model."""
    n = data.universe.n
    if cfg.rank > n:
        raise DomainError("rank cannot exceed the number of players")
    if len(data) == 0:
        raise DomainError("cannot fit an empty dataset")
    init_rng, shuffle_rng = _streams(cfg.seed)
    scale = 1.0 / math.sqrt(n)
    w = init_rng.uniform(-scale, scale, n)
    f = init_rng.uniform(-scale, scale, (n, cfg.rank))
    g = init_rng.uniform(-scale, scale, (n, cfg.rank))
    x_all = one_hot(data.coalitions, n)
    y_all = data.values
    loss = math.inf
    # divergence is detected below, so overflow warnings are redundant
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            order = shuffle_rng.permutation(y_all.size)
            for lo in range(0, y_all.size, cfg.batch_size):
                idx = order[lo:lo + cfg.batch_size]
                _, (dw, df, dg) = lowrank_loss((w, f, g), x_all[idx], y_all[idx], cfg.l2)
                w, f, g = w - cfg.learning_rate * dw, f - cfg.learning_rate * df, g - cfg.learning_rate * dg
            loss, _ = lowrank_loss((w, f, g), x_all, y_all, cfg.l2)
            if not math.isfinite(loss):
                raise NumericalError("training loss became non-finite", epoch=epoch)
    mse = float(np.mean((_lowrank_predict(x_all, w, f, g) - y_all) ** 2))
    return LowRankPairwiseModel(data.universe, w, f, g,
                                {"method": "lowrank_pairwise", "rank": cfg.rank, "l2": cfg.l2,
                                 "train_mse": mse, "loss": loss, "epochs": cfg.epochs})


def pairwise_to_cga(m: LowRankPairwiseModel) -> CgaModel:
    """Order-2 CGA weights equivalent to a low-rank pairwise model.

    One-hot features make ``x_i**2 == x_i``, so the diagonal of ``F G^T``
    folds into the singleton weights and only ``V_ij + V_ji`` matters for pairs.
    """
    n = m.universe.n
    v = m.interaction
    iu, ju = np.triu_indices(n, 1)
    pairs = [(1 << i) | (1 << j) for i, j in zip(iu.tolist(), ju.tolist())]
    masks = mask_array([1 << i for i in range(n)] + pairs, n)
    values = np.concatenate([m.w + np.diag(v), v[iu, ju] + v[ju, iu]])
    return CgaModel(m.universe, min(2, n), masks, values, dict(m.meta))


# Bradley-Terry -----------------------------------------------------------------

def team_features(teams, cols: np.ndarray) -> sp.csr_matrix:
    """Sparse 0/1 rows marking which weight columns lie inside each team."""
    lookup = {int(c): j for j, c in enumerate(cols)}
    k = int(popcount(cols).max()) if cols.size else 0
    indptr, indices = [0], []
    for t in np.asarray(teams).reshape(-1).tolist():
        mem = members(t)
        for size in range(1, k + 1):
            for combo in combinations(mem, size):
                mask = 0
                for i in combo:
                    mask |= 1 << i
                indices.append(lookup[mask])
        indptr.append(len(indices))
    data = np.ones(len(indices))
    return sp.csr_matrix((data, indices, indptr), shape=(len(indptr) - 1, cols.size))


def bradley_terry_loss(omega, diff, won, l2):
    """Mean negative log-likelihood plus ridge penalty, with gradient.

    ``diff`` maps weights to score differences ``vhat(A) - vhat(B)``.
    """
    z = diff @ omega
    s = np.where(won, 1.0, -1.0)
    nll = float(np.mean(np.logaddexp(0.0, -s * z)))
    # d/dz log(1 + exp(-s z)) = -s * sigmoid(-s z)
    g = -s * _sigmoid(-s * z)
    grad = diff.T @ g / z.size + 2.0 * l2 * omega
    return nll + l2 * float(omega @ omega), np.asarray(grad).reshape(-1), nll


def _sigmoid(t):
    out = np.empty_like(t, dtype=np.float64)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def fit_bradley_terry(data: MatchupDataset, k: int, cfg: FitConfig) -> CgaModel:
    """Fit order-``k`` weights (k in {1, 2}) to matchup outcomes.

    After training, singleton weights are shifted so the mean score over the
    distinct training teams is zero.  The shift adds ``c * |T|`` to every
    team, so it is only applied when all those teams have the same size;
    ``meta["centered"]`` records whether it happened.
    """
    if k not in (1, 2):
        raise DomainError("Bradley-Terry fitting supports k = 1 or k = 2")
    if len(data) == 0:
        raise DomainError("cannot fit an empty matchup dataset")
    n = data.universe.n
    cols = canonical_columns(n, k)
    diff = (team_features(data.team_a, cols) - team_features(data.team_b, cols)).tocsr()
    won = data.a_won
    init_rng, shuffle_rng = _streams(cfg.seed)
    scale = 1.0 / math.sqrt(n)
    omega = init_rng.uniform(-scale, scale, cols.size)
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            order = shuffle_rng.permutation(len(data))
            for lo in range(0, len(data), cfg.batch_size):
                idx = order[lo:lo + cfg.batch_size]
                _, grad, _ = bradley_terry_loss(omega, diff[idx], won[idx], cfg.l2)
                omega = omega - cfg.learning_rate * grad
            if not np.all(np.isfinite(omega)):
                raise NumericalError("weights became non-finite", epoch=epoch)
    _, _, nll = bradley_terry_loss(omega, diff, won, cfg.l2)

    teams = np.unique(np.concatenate([data.team_a, data.team_b]))
    sizes = np.unique(popcount(teams))
    centered = sizes.size == 1
    if centered:
        scores = team_features(teams, cols) @ omega
        omega = omega.copy()
        omega[: n] -= scores.mean() / sizes[0]
    meta = {
        "method": "bradley_terry", "l2": cfg.l2, "mean_nll": nll, "epochs": cfg.epochs,
        "centered": bool(centered), "centering_set": "distinct training teams",
        "learning_rate": cfg.learning_rate, "seed": cfg.seed,
    }
    return CgaModel(data.universe, k, cols, omega, meta)


def predict_win_prob(model, a: int, b: int) -> float:
    """``1 / (1 + exp(vhat(b) - vhat(a)))`` for disjoint non-empty teams."""
    a, b = int(a), int(b)
    if a == 0 or b == 0:
        raise DomainError("teams must be non-empty")
    if a & b:
        raise DomainError("teams overlap")
    sa, sb = np.asarray(model.evaluate(mask_array([a, b], model.universe.n)), dtype=np.float64)
    return float(_sigmoid(np.array([sa - sb]))[0])
