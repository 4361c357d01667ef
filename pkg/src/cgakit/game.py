"""Players, coalitions, exact games and interaction-weight (CGA) models.

Coalitions are plain integers used as little-endian bitmasks: bit ``i`` is set
when the player at index ``i`` of the universe is a member.  Dense tables are
indexed by mask value, so ``values[0]`` is the empty coalition and
``values[2**n - 1]`` is the grand coalition.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import CapacityError, DomainError

MAX_DENSE_PLAYERS = 24
MAX_BRUTEFORCE_PLAYERS = 20
# Larger universes keep masks as Python ints in object arrays.
MAX_INT64_PLAYERS = 62

Coalition = int


def mask_array(masks, n: int) -> np.ndarray:
    """1-d array of coalition masks: int64 when ``n`` bits fit, else Python ints."""
    if n <= MAX_INT64_PLAYERS:
        return np.asarray(masks, dtype=np.int64).reshape(-1)
    flat = np.asarray(masks, dtype=object).reshape(-1)
    out = np.empty(flat.size, dtype=object)
    out[:] = [int(m) for m in flat]
    return out


def popcount(masks):
    """Number of members of each coalition (works on ints and int arrays)."""
    if isinstance(masks, (int, np.integer)):
        return int(masks).bit_count()
    a = np.asarray(masks)
    if a.dtype == object:
        return np.fromiter((int(m).bit_count() for m in a.ravel()), dtype=np.int64,
                           count=a.size).reshape(a.shape)
    return np.bitwise_count(a.astype(np.int64)).astype(np.int64)


def membership(masks, n: int) -> np.ndarray:
    """Float 0/1 matrix with entry (r, i) = 1 iff player ``i`` is in ``masks[r]``."""
    a = np.asarray(masks).reshape(-1)
    if a.dtype != object:
        return ((a.astype(np.int64)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.float64)
    out = np.zeros((a.size, n))
    for r, m in enumerate(a.tolist()):
        out[r, members(m)] = 1.0
    return out


def members(mask: int) -> list[int]:
    """Indices of the players in ``mask``, ascending."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def mask_from_indices(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << int(i)
    return mask


def check_dense(n: int, limit: int = MAX_DENSE_PLAYERS, what: str = "dense table"):
    if n > limit:
        raise CapacityError(f"{what} needs n <= {limit}, got n = {n}")


def all_masks(n: int) -> np.ndarray:
    check_dense(n)
    return np.arange(1 << n, dtype=np.int64)


def masks_of_size(n: int, size: int) -> np.ndarray:
    """All coalitions with exactly ``size`` members, in increasing mask order."""
    if not 0 <= size <= n:
        return mask_array([], n)
    combos = (mask_from_indices(c) for c in itertools.combinations(range(n), size))
    if n > MAX_INT64_PLAYERS:
        out = mask_array(list(combos), n)
    else:
        out = np.fromiter(combos, dtype=np.int64, count=comb(n, size))
    out.sort()
    return out


def canonical_columns(n: int, k: int) -> np.ndarray:
    """Every coalition ``S`` with ``1 <= |S| <= k``, sorted by size then mask.

    This is the column order used by weight vectors, design matrices and
    serialised models alike.
    """
    k = min(k, n)
    if n <= 16:
        masks = np.arange(1, 1 << n, dtype=np.int64)
        sizes = popcount(masks)
        keep = sizes <= k
        masks, sizes = masks[keep], sizes[keep]
        return masks[np.lexsort((masks, sizes))]
    return np.concatenate([masks_of_size(n, s) for s in range(1, k + 1)])


def column_count(n: int, k: int) -> int:
    return sum(comb(n, j) for j in range(1, min(k, n) + 1))


def subset_indicator(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """0/1 matrix with entry (r, c) = 1 iff ``cols[c]`` is a subset of ``rows[r]``."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    return ((rows[:, None] & cols[None, :]) == cols[None, :]).astype(np.float64)


def subset_sum_transform(values: np.ndarray) -> np.ndarray:
    """Zeta transform: ``out[C] = sum of values[S] over S subset of C``."""
    out = np.array(values, dtype=np.float64, copy=True)
    n = out.size.bit_length() - 1
    for i in range(n):
        view = out.reshape(-1, 2, 1 << i)
        view[:, 1, :] += view[:, 0, :]
    return out


def moebius_transform(values: np.ndarray) -> np.ndarray:
    """Inverse of :func:`subset_sum_transform`."""
    out = np.array(values, dtype=np.float64, copy=True)
    n = out.size.bit_length() - 1
    for i in range(n):
        view = out.reshape(-1, 2, 1 << i)
        view[:, 1, :] -= view[:, 0, :]
    return out


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PlayerUniverse:
    """Ordered set of player ids; index ``i`` of a mask refers to ``ids[i]``."""

    ids: tuple[str, ...]

    def __post_init__(self):
        ids = tuple(str(p) for p in self.ids)
        if not ids:
            raise DomainError("a player universe needs at least one player")
        if any(p == "" for p in ids):
            raise DomainError("player ids must be non-empty strings")
        if len(set(ids)) != len(ids):
            raise DomainError("player ids must be unique")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(ids)})

    @classmethod
    def of_size(cls, n: int) -> "PlayerUniverse":
        return cls(tuple(f"p{i}" for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def grand(self) -> int:
        return (1 << self.n) - 1

    def index(self, player: str) -> int:
        try:
            return self._index[player]
        except KeyError:
            raise DomainError(f"unknown player {player!r}") from None

    def mask(self, players: Iterable[str]) -> int:
        """Coalition mask of a collection of player ids."""
        mask = 0
        for p in players:
            mask |= 1 << self.index(p)
        return mask

    def players(self, mask: int) -> list[str]:
        self.check(mask)
        return [self.ids[i] for i in members(mask)]

    def check(self, mask) -> int:
        mask = int(mask)
        if mask < 0 or mask >> self.n:
            raise DomainError(f"coalition {mask:#x} is not a subset of a {self.n}-player universe")
        return mask


@dataclass(frozen=True, eq=False)
class Game:
    """Exact characteristic function stored as a dense table over all ``2**n`` masks."""

    universe: PlayerUniverse
    values: np.ndarray

    def __post_init__(self):
        check_dense(self.universe.n)
        values = _readonly(self.values, np.float64)
        if values.shape != (1 << self.universe.n,):
            raise DomainError(
                f"a {self.universe.n}-player game needs {1 << self.universe.n} values, got {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, universe: PlayerUniverse, fn: Callable[[int], float]) -> "Game":
        return cls(universe, [fn(m) for m in range(1 << universe.n)])

    @classmethod
    def from_model(cls, model: "CgaModel") -> "Game":
        """Dense table induced by a CGA model (subset-sum transform of its weights)."""
        n = model.universe.n
        check_dense(n)
        dense = np.zeros(1 << n)
        dense[model.masks] = model.values
        return cls(model.universe, subset_sum_transform(dense))

    @property
    def n(self) -> int:
        return self.universe.n

    def value(self, mask: int) -> float:
        return float(self.values[self.universe.check(mask)])

    def evaluate(self, coalitions) -> np.ndarray:
        return self.values[np.asarray(coalitions, dtype=np.int64)]


@dataclass(frozen=True, eq=False)
class CgaModel:
    """Sparse interaction weights ``omega_S`` for ``1 <= |S| <= order``.

    Weights are kept as two parallel arrays in canonical (size, mask) order.
    Absent coalitions have weight zero, and the empty coalition always
    evaluates to 0.  ``meta`` holds free-form fitting metadata.
    """

    universe: PlayerUniverse
    order: int
    masks: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.order < 1:
            raise DomainError("model order must be at least 1")
        masks = mask_array(self.masks, self.universe.n)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if masks.shape != values.shape:
            raise DomainError("masks and values must have the same length")
        sizes = popcount(masks)
        if masks.size:
            if masks.min() < 1 or (masks >> self.universe.n).any():
                raise DomainError("weight keys must be non-empty coalitions of the universe")
            if sizes.max() > self.order:
                raise DomainError(f"weight of size {sizes.max()} exceeds model order {self.order}")
        if masks.dtype == object:
            order = sorted(range(masks.size), key=lambda j: (sizes[j], masks[j]))
        else:
            order = np.lexsort((masks, sizes))
        masks, values = masks[order], values[order]
        if len(set(masks.tolist())) != masks.size:
            raise DomainError("duplicate weight keys")
        object.__setattr__(self, "masks", _readonly(masks, masks.dtype))
        object.__setattr__(self, "values", _readonly(values, np.float64))
        object.__setattr__(self, "_lookup", None)

    @classmethod
    def from_weights(cls, universe: PlayerUniverse, order: int, weights: Mapping[int, float], meta=None):
        keys = list(weights)
        return cls(universe, order, mask_array(keys, universe.n),
                   np.array([weights[k] for k in keys], dtype=np.float64), dict(meta or {}))

    @property
    def n(self) -> int:
        return self.universe.n

    @property
    def weights(self) -> dict[int, float]:
        return dict(zip(self.masks.tolist(), self.values.tolist()))

    def weight(self, mask: int) -> float:
        i = np.flatnonzero(self.masks == mask)
        return float(self.values[i[0]]) if i.size else 0.0

    def weight_vector(self, k: int | None = None) -> np.ndarray:
        """Dense weights over ``canonical_columns(n, k)`` (zeros where absent)."""
        cols = canonical_columns(self.n, self.order if k is None else k)
        lookup = dict(zip(cols.tolist(), range(cols.size)))
        out = np.zeros(cols.size)
        for m, w in zip(self.masks.tolist(), self.values.tolist()):
            j = lookup.get(m)
            if j is None:
                raise DomainError(f"weight on {m:#x} is outside the requested order")
            out[j] = w
        return out

    def evaluate(self, coalitions) -> np.ndarray:
        """Vectorised evaluation of many coalition masks."""
        c = mask_array(coalitions, self.n)
        if c.size and (c.min() < 0 or (c >> self.n).any()):
            raise DomainError("coalition outside the model's universe")
        if c.dtype == object:
            return self._evaluate_sparse(c.tolist())
        out = np.empty(c.size)
        step = max(1, 4_000_000 // max(1, self.masks.size))
        for lo in range(0, c.size, step):
            block = c[lo:lo + step, None]
            inside = (block & self.masks[None, :]) == self.masks[None, :]
            out[lo:lo + step] = inside @ self.values
        return out

    def _evaluate_sparse(self, coalitions) -> np.ndarray:
        # large universes: sum weights over each coalition's small subsets
        if self._lookup is None:
            object.__setattr__(self, "_lookup", self.weights)
        lookup = self._lookup
        out = np.empty(len(coalitions))
        for r, c in enumerate(coalitions):
            mem = members(c)
            total = 0.0
            for size in range(1, min(self.order, len(mem)) + 1):
                for combo in itertools.combinations(mem, size):
                    total += lookup.get(mask_from_indices(combo), 0.0)
            out[r] = total
        return out

    def to_game(self) -> Game:
        return Game.from_model(self)


@dataclass(frozen=True, eq=False)
class Allocation:
    """One payoff per player, aligned with the universe order."""

    universe: PlayerUniverse
    payoffs: np.ndarray

    def __post_init__(self):
        payoffs = _readonly(self.payoffs, np.float64)
        if payoffs.shape != (self.universe.n,):
            raise DomainError(f"expected {self.universe.n} payoffs, got shape {payoffs.shape}")
        object.__setattr__(self, "payoffs", payoffs)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.universe.ids, self.payoffs.tolist()))

    def coalition_payoff(self, mask: int) -> float:
        return float(sum(self.payoffs[i] for i in members(mask)))


GameLike = Union[Game, CgaModel]


def eval_cga(model: CgaModel, c: int) -> float:
    """Value of coalition ``c``: sum of the stored weights whose key is a subset of ``c``."""
    c = model.universe.check(c)
    if model.masks.dtype == object:
        return float(model._evaluate_sparse([c])[0])
    inside = (model.masks & c) == model.masks
    return float(model.values[inside].sum())


def weights_from_game(g: Game) -> CgaModel:
    """Unique full-order interaction weights reproducing ``g`` on non-empty coalitions.

    CGA models have no constant term, so a non-zero ``v(empty)`` cannot be
    represented; it is dropped with a warning.
    """
    values = np.array(g.values, copy=True)
    if values[0] != 0.0:
        warnings.warn(
            f"game has v(empty) = {values[0]!r}; interaction weights ignore it",
            stacklevel=2,
        )
        values[0] = 0.0
    omega = moebius_transform(values)
    masks = np.flatnonzero(omega)
    masks = masks[masks != 0]
    return CgaModel(g.universe, g.n, masks, omega[masks])


def truncate(model: CgaModel, k: int) -> CgaModel:
    """Drop every weight on a coalition with more than ``k`` members."""
    if k < 1:
        raise DomainError("truncation order must be at least 1")
    keep = popcount(model.masks) <= k
    return CgaModel(model.universe, min(k, model.order), model.masks[keep], model.values[keep],
                    dict(model.meta))


def shapley_from_weights(model: CgaModel) -> Allocation:
    """Closed-form Shapley values: each weight is split evenly among its members."""
    n = model.n
    share = model.values / popcount(model.masks)
    return Allocation(model.universe, share @ membership(model.masks, n))


def _shapley_dense(values: np.ndarray, n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    sizes = popcount(masks)
    # |S|! (n - |S| - 1)! / n!  ==  1 / (n * C(n-1, |S|))
    coef = np.array([1.0 / (n * comb(n - 1, s)) for s in range(n)])
    phi = np.empty(n)
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = coef[sizes[without]] @ (values[without | bit] - values[without])
    return phi


def shapley_bruteforce(g: Game) -> Allocation:
    """Shapley values straight from the marginal-contribution definition."""
    check_dense(g.n, MAX_BRUTEFORCE_PLAYERS, "brute-force Shapley")
    return Allocation(g.universe, _shapley_dense(g.values, g.n))


def _as_index_groups(universe: PlayerUniverse, groups) -> list[list[int]]:
    out = []
    for grp in groups:
        idx = []
        for p in grp:
            if isinstance(p, (int, np.integer)) and not isinstance(p, bool):
                if not 0 <= p < universe.n:
                    raise DomainError(f"player index {p} out of range")
                idx.append(int(p))
            else:
                idx.append(universe.index(p))
        out.append(idx)
    flat = sorted(i for grp in out for i in grp)
    if flat != list(range(universe.n)) or any(not grp for grp in out):
        raise DomainError("groups must partition the players into non-empty parts")
    return out


def local_to_global(indices: Sequence[int]) -> np.ndarray:
    """Global masks of every sub-coalition of a group, indexed by local mask."""
    g = len(indices)
    if indices and max(indices) >= MAX_INT64_PLAYERS:
        return mask_array([mask_from_indices(indices[j] for j in members(m))
                           for m in range(1 << g)], max(indices) + 1)
    local = np.arange(1 << g, dtype=np.int64)
    out = np.zeros(1 << g, dtype=np.int64)
    for j, i in enumerate(indices):
        out |= ((local >> j) & 1) << i
    return out


def group_shapley(game: GameLike, groups) -> Allocation:
    """Shapley value of every player inside the subgame of its own group.

    ``groups`` is a partition of the players given as ids or indices.
    """
    universe = game.universe
    parts = _as_index_groups(universe, groups)
    phi = np.zeros(universe.n)
    for idx in parts:
        check_dense(len(idx), MAX_BRUTEFORCE_PLAYERS, "group Shapley")
        sub = game.evaluate(local_to_global(idx))
        phi[idx] = _shapley_dense(np.asarray(sub, dtype=np.float64), len(idx))
    return Allocation(universe, phi)


def random_cga(n: int, k: int, seed: int, weight_scale: float = 1.0,
               universe: PlayerUniverse | None = None) -> CgaModel:
    """Order-``k`` model with i.i.d. N(0, weight_scale**2) weights on every ``|S| <= k``."""
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    check_dense(n)
    universe = universe or PlayerUniverse.of_size(n)
    if universe.n != n:
        raise DomainError("universe size does not match n")
    cols = canonical_columns(n, k)
    rng = np.random.default_rng(seed)
    return CgaModel(universe, k, cols, rng.normal(0.0, weight_scale, cols.size))
