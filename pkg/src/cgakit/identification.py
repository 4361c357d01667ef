"""Design matrices, rank-based identifiability checks and misspecification error.

A design matrix has one row per observed coalition ``C`` and one column per
weight ``S`` (all ``1 <= |S| <= k`` in canonical order); the entry is 1 when
``S`` is a subset of ``C``.  The order-``k`` model is identified by a set of
observations exactly when this matrix has full column rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Optional

import numpy as np

from .errors import CapacityError, DomainError
from .game import (
    CgaModel,
    all_masks,
    canonical_columns,
    masks_of_size,
    subset_indicator,
)

MAX_DESIGN_PLAYERS = 14
MAX_EXACT_RANK_PLAYERS = 10
MAX_MISSPEC_PLAYERS = 12
RANK_RTOL = 1e-8
RIDGE_FALLBACK = 1e-10

_PRIME = 2_147_483_647  # 2**31 - 1, so products of residues fit in int64


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    n: int
    order: int
    rows: np.ndarray
    columns: np.ndarray
    entries: np.ndarray

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class IdentifiabilityReport:
    n: int
    k: int
    sizes: tuple[int, ...]
    rank: int
    column_count: int
    identified: bool
    exact_rank: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "n": self.n, "k": self.k, "sizes": list(self.sizes), "rank": self.rank,
            "column_count": self.column_count, "identified": self.identified,
            "exact_rank": self.exact_rank,
        }


@dataclass(frozen=True, eq=False)
class MisspecReport:
    n: int
    k: int
    r: int
    error_vector: Optional[np.ndarray] = None
    max_eigenvalue: Optional[float] = None
    avg_trace: Optional[float] = None
    ridge_fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "n": self.n, "k": self.k, "r": self.r,
            "error_vector": None if self.error_vector is None else self.error_vector.tolist(),
            "max_eigenvalue": self.max_eigenvalue, "avg_trace": self.avg_trace,
            "ridge_fallback": self.ridge_fallback,
        }


def _check_orders(n: int, k: int, limit: int):
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n > limit:
        raise CapacityError(f"design matrices are limited to n <= {limit}, got n = {n}")


def coalitions_of_sizes(n: int, sizes: Iterable[int]) -> np.ndarray:
    """All coalitions whose size is in ``sizes``, grouped by size in the given order."""
    sizes = sorted(set(int(s) for s in sizes))
    for s in sizes:
        if not 0 <= s <= n:
            raise DomainError(f"coalition size {s} outside [0, {n}]")
    return np.concatenate([masks_of_size(n, s) for s in sizes]) if sizes else np.zeros(0, np.int64)


def build_design_matrix(n: int, k: int, row_coalitions) -> DesignMatrix:
    _check_orders(n, k, MAX_DESIGN_PLAYERS)
    rows = np.asarray(list(row_coalitions) if not isinstance(row_coalitions, np.ndarray)
                      else row_coalitions, dtype=np.int64).reshape(-1)
    if rows.size and (rows.min() < 0 or (rows >> n).any()):
        raise DomainError("row coalition outside the universe")
    cols = canonical_columns(n, k)
    return DesignMatrix(n, k, rows, cols, subset_indicator(rows, cols))


def numerical_rank(matrix: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Count singular values at or above ``rtol * sigma_max``."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int((s >= rtol * s[0]).sum())


def _rank_mod_p(a: np.ndarray) -> int:
    a = np.asarray(a, dtype=np.int64) % _PRIME
    m, ncol = a.shape
    rank = 0
    for c in range(ncol):
        if rank == m:
            break
        nz = np.flatnonzero(a[rank:, c])
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        inv = pow(int(a[rank, c]), _PRIME - 2, _PRIME)
        a[rank] = (a[rank] * inv) % _PRIME
        below = a[rank + 1:, c].copy()
        hit = np.flatnonzero(below)
        if hit.size:
            rows = rank + 1 + hit
            a[rows] = (a[rows] - (below[hit, None] * a[rank][None, :]) % _PRIME) % _PRIME
        rank += 1
    return rank


def _rank_bareiss(a) -> int:
    rows = [[int(x) for x in r] for r in np.asarray(a)]
    m = len(rows)
    ncol = len(rows[0]) if m else 0
    rank, prev = 0, 1
    for c in range(ncol):
        piv = next((r for r in range(rank, m) if rows[r][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        p_row = rows[rank]
        p = p_row[c]
        for r in range(rank + 1, m):
            row = rows[r]
            f = row[c]
            for j in range(c + 1, ncol):
                row[j] = (p * row[j] - f * p_row[j]) // prev
            row[c] = 0
        prev = p
        rank += 1
    return rank


def exact_rank(matrix: np.ndarray) -> int:
    """Rank over the rationals of an integer matrix, computed without floating point.

    Elimination modulo a prime gives a lower bound on the rational rank; when
    that bound already equals ``min(rows, cols)`` it is exact.  Otherwise the
    fraction-free (Bareiss) elimination over Python integers decides.
    """
    a = np.asarray(matrix)
    if a.size == 0:
        return 0
    if not np.array_equal(a, np.round(a)):
        raise DomainError("exact rank needs an integer matrix")
    a = np.round(a).astype(np.int64)
    r = _rank_mod_p(a)
    if r == min(a.shape):
        return r
    return _rank_bareiss(a)


def check_identifiability(n: int, k: int, sizes, exact: bool = False) -> IdentifiabilityReport:
    """Rank test for observing every coalition whose size is in ``sizes``."""
    sizes = tuple(sorted(set(int(s) for s in sizes)))
    if any(not 1 <= s <= n for s in sizes):
        raise DomainError(f"team sizes must lie in [1, {n}], got {sizes}")
    dm = build_design_matrix(n, k, coalitions_of_sizes(n, sizes))
    rank = numerical_rank(dm.entries)
    d = dm.columns.size
    ex = None
    if exact:
        if n > MAX_EXACT_RANK_PLAYERS:
            raise CapacityError(f"exact rank is limited to n <= {MAX_EXACT_RANK_PLAYERS}")
        ex = exact_rank(dm.entries)
    return IdentifiabilityReport(n, k, sizes, rank, d, rank == d, ex)


def sufficient_size_sets(n: int, k: int) -> list[tuple[int, ...]]:
    """Every choice of exactly ``k`` distinct sizes from ``[k, n - 1]``."""
    return list(combinations(range(k, n), k))


def _residual_operator(n: int, k: int, r: int):
    """Return (M_nr, E, ridge_used) with E = (I - P_nk) M_nr over all 2**n coalitions."""
    if not 1 <= k <= r <= n:
        raise DomainError(f"need 1 <= k <= r <= n, got k={k}, r={r}, n={n}")
    if n > MAX_MISSPEC_PLAYERS:
        raise CapacityError(f"misspecification analysis is limited to n <= {MAX_MISSPEC_PLAYERS}")
    rows = all_masks(n)
    m_k = subset_indicator(rows, canonical_columns(n, k))
    m_r = subset_indicator(rows, canonical_columns(n, r))
    normal = m_k.T @ m_k
    rhs = m_k.T @ m_r
    ridge = False
    try:
        chol = np.linalg.cholesky(normal)
        coef = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    except np.linalg.LinAlgError:
        ridge = True
        coef = np.linalg.solve(normal + RIDGE_FALLBACK * np.eye(normal.shape[0]), rhs)
    return m_r, m_r - m_k @ coef, ridge


def misspec_error(n: int, k: int, r: int, true_weights: CgaModel) -> MisspecReport:
    """Residual of projecting an order-``r`` game onto the order-``k`` column space."""
    if true_weights.n != n or true_weights.order > r:
        raise DomainError("true weights must be an order <= r model on n players")
    _, e, ridge = _residual_operator(n, k, r)
    return MisspecReport(n, k, r, error_vector=e @ true_weights.weight_vector(r), ridge_fallback=ridge)


def misspec_spectrum(n: int, k: int, r: int) -> MisspecReport:
    """Largest eigenvalue and per-column trace of ``E^T E`` for the residual operator ``E``."""
    _, e, ridge = _residual_operator(n, k, r)
    s = np.linalg.svd(e, compute_uv=False)
    return MisspecReport(
        n, k, r,
        max_eigenvalue=float(s[0] ** 2) if s.size else 0.0,
        avg_trace=float((s ** 2).sum() / e.shape[1]),
        ridge_fallback=ridge,
    )
