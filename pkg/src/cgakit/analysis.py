"""How errors in a characteristic function propagate into Shapley values.

The Shapley value is linear in the game, ``phi = S_n @ v`` with ``S_n`` an
``n x 2**n`` matrix.  ``S_n S_n^T`` has one diagonal value ``d1`` and one
off-diagonal value ``d2``, so its spectrum is known in closed form: the top
eigenvalue is ``d1 + (n - 1) d2 = 2 / n`` and the other ``n - 1`` are
``d1 - d2``.  The functions here materialise that matrix, check worst-case
L1/L2 error bounds on concrete perturbations, and run seeded Monte Carlo
experiments for the average-case bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import CapacityError, DomainError, NumericalError
from .game import (
    CgaModel,
    Game,
    PlayerUniverse,
    _as_index_groups,
    all_masks,
    group_shapley,
    local_to_global,
    popcount,
)

MAX_MATRIX_PLAYERS = 14
MAX_MC_PLAYERS = 12
MAX_COVERAGE_PLAYERS = 20
MC_BLOCK = 1000


class BoundCheck(NamedTuple):
    """One inequality ``lhs <= rhs`` evaluated on concrete data."""

    lhs: float
    rhs: float
    holds: bool
    applicable: bool = True
    note: str = ""

    @classmethod
    def not_applicable(cls, note: str) -> "BoundCheck":
        return cls(float("nan"), float("nan"), False, False, note)

    def to_dict(self) -> dict:
        return self._asdict()


@dataclass(frozen=True, eq=False)
class ShapleyMatrix:
    n: int
    entries: np.ndarray

    def apply(self, values) -> np.ndarray:
        return self.entries @ np.asarray(values, dtype=np.float64)


@dataclass(frozen=True)
class SpectrumReport:
    n: int
    d1: float
    d2: float
    sigma_max_sq: float
    trace: float
    numeric_sigma_max_sq: float
    numeric_rest: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "n": self.n, "d1": self.d1, "d2": self.d2, "sigma_max_sq": self.sigma_max_sq,
            "trace": self.trace, "numeric_sigma_max_sq": self.numeric_sigma_max_sq,
            "numeric_rest": list(self.numeric_rest),
        }


@dataclass(frozen=True)
class L1BoundReport:
    """The three L1 inequalities.

    ``general``: sum |dphi| <= ||dv||_1 for any perturbation.
    ``anchored``: factor 2/n when the empty and grand coalitions carry no error.
    ``grouped``: factor 2m/n for Shapley values computed inside m equal groups.
    """

    general: BoundCheck
    anchored: BoundCheck
    grouped: BoundCheck

    def to_dict(self) -> dict:
        return {k: getattr(self, k).to_dict() for k in ("general", "anchored", "grouped")}


@dataclass(frozen=True)
class NoiseExperiment:
    """Monte Carlo set-up for the average-case bounds.

    ``norm_kind`` is ``"L2"`` (noise uniform on the sphere of radius r) or
    ``"L1"`` (|noise| / r uniform on the simplex, independent random signs).
    ``radius`` may be a sequence of radii, mixed with ``radius_probs``.
    """

    n: int
    norm_kind: str
    radius: Union[float, Sequence[float]] = 1.0
    trials: int = 1000
    seed: int = 0
    kappa_ratio: float = 1.0
    radius_probs: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.norm_kind not in ("L1", "L2"):
            raise DomainError(f"norm_kind must be 'L1' or 'L2', got {self.norm_kind!r}")
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if np.any(np.asarray(self.radius, dtype=float) < 0):
            raise DomainError("radius must be non-negative")
        if self.kappa_ratio < 1:
            raise DomainError("kappa_ratio (max/min density) is at least 1")

    def radii(self) -> tuple[np.ndarray, np.ndarray]:
        r = np.atleast_1d(np.asarray(self.radius, dtype=np.float64))
        if self.radius_probs is None:
            p = np.full(r.size, 1.0 / r.size)
        else:
            p = np.asarray(self.radius_probs, dtype=np.float64)
            if p.shape != r.shape or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
                raise DomainError("radius_probs must be a probability vector matching radius")
        return r, p


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    """Outcome of :func:`mc_average_case`.

    ``bound`` is the stated average-case bound.  For L2, ``exact_mean`` is
    ``E[r^2] Tr(S S^T) / 2^n`` and ``exact_within_3se`` compares it to the
    estimate.  For L1, ``summed_player_bound`` is ``n`` times the per-player
    bound ``2 (kappa1/kappa0) E[r] / 2^n``.
    """

    empirical_mean: float
    standard_error: float
    bound: float
    holds: bool
    exact_mean: Optional[float] = None
    exact_within_3se: Optional[bool] = None
    summed_player_bound: Optional[float] = None
    per_trial: Optional[np.ndarray] = None

    def to_dict(self, with_trials: bool = False) -> dict:
        out = {
            "empirical_mean": self.empirical_mean, "standard_error": self.standard_error,
            "bound": self.bound, "holds": self.holds, "exact_mean": self.exact_mean,
            "exact_within_3se": self.exact_within_3se,
            "summed_player_bound": self.summed_player_bound,
        }
        if with_trials and self.per_trial is not None:
            out["per_trial"] = self.per_trial.tolist()
        return out


def _shapley_coefficients(n: int):
    # member of S: 1 / (n C(n-1, |S|-1)); non-member: -1 / (n C(n-1, |S|))
    pos = np.array([0.0] + [1.0 / (n * comb(n - 1, s - 1)) for s in range(1, n + 1)])
    neg = np.array([-1.0 / (n * comb(n - 1, s)) for s in range(n)] + [0.0])
    return pos, neg


def shapley_matrix(n: int) -> ShapleyMatrix:
    if not 1 <= n <= MAX_MATRIX_PLAYERS:
        raise CapacityError(f"Shapley matrix is limited to 1 <= n <= {MAX_MATRIX_PLAYERS}")
    masks = all_masks(n)
    sizes = popcount(masks)
    pos, neg = _shapley_coefficients(n)
    inside = ((masks[None, :] >> np.arange(n)[:, None]) & 1).astype(bool)
    entries = np.where(inside, pos[sizes][None, :], neg[sizes][None, :])
    entries.setflags(write=False)
    return ShapleyMatrix(n, entries)


def gram_entries(n: int) -> tuple[float, float]:
    """Closed-form diagonal ``d1`` and off-diagonal ``d2`` of ``S_n S_n^T``."""
    if n < 1:
        raise DomainError("n must be positive")
    d1 = 2.0 * sum(1.0 / comb(n - 1, s) for s in range(n)) / n**2
    if n == 1:
        return d1, 0.0
    both = sum(comb(n - 2, k - 2) / comb(n - 1, k - 1) ** 2 for k in range(2, n + 1))
    cross = sum(comb(n - 2, k - 1) / (comb(n - 1, k) * comb(n - 1, k - 1)) for k in range(1, n))
    neither = sum(comb(n - 2, k) / comb(n - 1, k) ** 2 for k in range(0, n - 1))
    return d1, (both - 2.0 * cross + neither) / n**2


def spectrum(n: int) -> SpectrumReport:
    """Closed-form spectrum of ``S_n S_n^T``, cross-checked against the matrix."""
    d1, d2 = gram_entries(n)
    entries = shapley_matrix(n).entries
    gram = entries @ entries.T
    off = gram[~np.eye(n, dtype=bool)]
    if abs(np.diag(gram) - d1).max() > 1e-9 or (off.size and abs(off - d2).max() > 1e-9):
        raise NumericalError(f"closed-form Gram entries disagree with the matrix at n={n}")
    eig = np.linalg.eigvalsh(gram)
    return SpectrumReport(
        n=n, d1=d1, d2=d2, sigma_max_sq=d1 + (n - 1) * d2, trace=n * d1,
        numeric_sigma_max_sq=float(eig[-1]), numeric_rest=tuple(float(x) for x in eig[:-1]),
    )


def _values(g) -> np.ndarray:
    if isinstance(g, Game):
        return np.asarray(g.values)
    if isinstance(g, CgaModel):
        return np.asarray(g.to_game().values)
    return np.asarray(g, dtype=np.float64)


def _pair(v, vhat) -> tuple[np.ndarray, np.ndarray, int]:
    a, b = _values(v), _values(vhat)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("games must be dense tables over the same universe")
    n = a.size.bit_length() - 1
    if a.size != 1 << n:
        raise DomainError("dense table length must be a power of two")
    if n > MAX_MATRIX_PLAYERS:
        raise CapacityError(f"bounds are limited to n <= {MAX_MATRIX_PLAYERS}")
    return a, b, n


def l2_worst_bound(v, vhat) -> BoundCheck:
    """``||phi(v) - phi(vhat)||_2^2 <= (2/n) ||v - vhat||_2^2``."""
    a, b, n = _pair(v, vhat)
    dv = a - b
    dphi = shapley_matrix(n).apply(dv)
    lhs = float(dphi @ dphi)
    rhs = 2.0 / n * float(dv @ dv)
    return BoundCheck(lhs, rhs, lhs <= rhs + 1e-12)


def top_singular_direction(n: int) -> np.ndarray:
    """Unit perturbation that attains the L2 worst case."""
    _, _, vt = np.linalg.svd(shapley_matrix(n).entries, full_matrices=False)
    return vt[0]


def l1_bounds(v, vhat, groups=None, tol: float = 1e-12) -> L1BoundReport:
    """Evaluate the general, anchored and grouped L1 inequalities.

    A bound whose hypotheses fail on the given data is returned as not
    applicable instead of being evaluated.  The grouped bound requires equal
    group sizes of at least 3, no error on the empty coalition, errors only on
    subsets of single groups, and none on a group's full set (the anchored
    hypothesis applied inside each group).
    """
    a, b, n = _pair(v, vhat)
    dv = a - b
    e = float(np.abs(dv).sum())
    grand = (1 << n) - 1

    lhs = float(np.abs(shapley_matrix(n).apply(dv)).sum())
    general = BoundCheck(lhs, e, lhs <= e + tol)

    if n < 3:
        anchored = BoundCheck.not_applicable("needs n >= 3")
    elif dv[0] != 0.0 or dv[grand] != 0.0:
        anchored = BoundCheck.not_applicable("error on the empty or grand coalition")
    else:
        anchored = BoundCheck(lhs, 2.0 / n * e, lhs <= 2.0 / n * e + tol)

    grouped = BoundCheck.not_applicable("no groups given")
    if groups is not None:
        parts = _as_index_groups(PlayerUniverse.of_size(n), groups)
        sizes = {len(p) for p in parts}
        inside = np.zeros(1 << n, dtype=bool)
        for p in parts:
            inside[local_to_global(p)] = True
        full_sets = [int(local_to_global(p)[-1]) for p in parts]
        m = len(parts)
        if len(sizes) != 1:
            grouped = BoundCheck.not_applicable("groups differ in size")
        elif min(sizes) < 3:
            grouped = BoundCheck.not_applicable("groups need at least 3 players")
        elif dv[0] != 0.0:
            grouped = BoundCheck.not_applicable("error on the empty coalition")
        elif np.any(dv[~inside] != 0.0):
            grouped = BoundCheck.not_applicable("error on a coalition spanning groups")
        elif np.any(dv[full_sets] != 0.0):
            grouped = BoundCheck.not_applicable("error on a group's full set")
        else:
            ga = group_shapley(Game(PlayerUniverse.of_size(n), a), parts).payoffs
            gb = group_shapley(Game(PlayerUniverse.of_size(n), b), parts).payoffs
            glhs = float(np.abs(ga - gb).sum())
            grhs = 2.0 * m / n * e
            grouped = BoundCheck(glhs, grhs, glhs <= grhs + tol)
    return L1BoundReport(general, anchored, grouped)


def _noise_block(rng, kind: str, trials: int, dim: int) -> np.ndarray:
    if kind == "L2":
        x = rng.standard_normal((trials, dim))
        return x / np.linalg.norm(x, axis=1, keepdims=True)
    x = rng.exponential(size=(trials, dim))
    x /= x.sum(axis=1, keepdims=True)
    return x * rng.choice(np.array([-1.0, 1.0]), size=(trials, dim))


def mc_average_case(cfg: NoiseExperiment, keep_trials: bool = False) -> MonteCarloResult:
    """Estimate the mean Shapley error under random noise of fixed norm.

    Trials are drawn in fixed blocks, each from its own stream keyed by
    ``(seed, block index)``, so results do not depend on how blocks are
    scheduled.
    """
    n = cfg.n
    if not 1 <= n <= MAX_MC_PLAYERS:
        raise CapacityError(f"Monte Carlo experiments are limited to n <= {MAX_MC_PLAYERS}")
    radii, probs = cfg.radii()
    smat = shapley_matrix(n).entries
    dim = 1 << n
    out = np.empty(cfg.trials)
    for block, lo in enumerate(range(0, cfg.trials, MC_BLOCK)):
        size = min(MC_BLOCK, cfg.trials - lo)
        rng = np.random.default_rng([cfg.seed, block])
        r = radii[rng.choice(radii.size, size=size, p=probs)] if radii.size > 1 else np.full(size, radii[0])
        eps = _noise_block(rng, cfg.norm_kind, size, dim) * r[:, None]
        dphi = eps @ smat.T
        out[lo:lo + size] = (dphi**2).sum(axis=1) if cfg.norm_kind == "L2" else np.abs(dphi).sum(axis=1)
    mean = float(out.mean())
    se = float(out.std(ddof=1) / np.sqrt(out.size)) if out.size > 1 else float("nan")
    if cfg.norm_kind == "L2":
        r2 = float(probs @ radii**2)
        bound = 6.0 / n * cfg.kappa_ratio * r2 / dim
        exact = r2 * n * gram_entries(n)[0] / dim
        within = bool(abs(mean - exact) <= 3 * se) if out.size > 1 else None
        return MonteCarloResult(mean, se, bound, mean <= bound, exact, within,
                                per_trial=out if keep_trials else None)
    r1 = float(probs @ radii)
    bound = 2.0 * cfg.kappa_ratio * r1 / dim
    return MonteCarloResult(mean, se, bound, mean <= bound,
                            summed_player_bound=n * bound,
                            per_trial=out if keep_trials else None)


def pmac_coverage(model: CgaModel, g: Game, epsilon: float) -> float:
    """Fraction of non-empty coalitions with ``|v - vhat| <= eps * |vhat|``.

    For ``vhat >= 0`` this is ``(1-eps) vhat <= v <= (1+eps) vhat``; taking
    absolute values keeps the interval non-empty when ``vhat < 0``.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if model.n != g.n:
        raise DomainError("model and game must share a universe")
    if g.n > MAX_COVERAGE_PLAYERS:
        raise CapacityError(f"coverage is limited to n <= {MAX_COVERAGE_PLAYERS}")
    masks = all_masks(g.n)[1:]
    vhat = model.evaluate(masks)
    v = np.asarray(g.values)[1:]
    ok = np.abs(v - vhat) <= epsilon * np.abs(vhat)
    return float(ok.mean())
