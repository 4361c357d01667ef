"""CSV and JSON formats for games, datasets, models and allocations.

Coalitions are written as ``;``-joined player ids in universe order, with the
empty string for the empty coalition.  When reading, the universe is built
from ids in order of first appearance unless one is supplied.  Floats are
written with ``repr``, the shortest decimal that parses back to the same
double, so every value round-trips bit for bit.
"""

from __future__ import annotations

import csv
import json
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError, FormatError
from .game import Allocation, CgaModel, Game, PlayerUniverse, mask_array, members, popcount
from .estimation import MatchupDataset, PerformanceDataset

PERFORMANCE_HEADER = ["players", "value"]
MATCHUP_HEADER = ["team_a", "team_b", "a_won"]


def format_float(x: float) -> str:
    return repr(float(x))


def coalition_field(universe: PlayerUniverse, mask: int) -> str:
    return ";".join(universe.ids[i] for i in members(int(mask)))


class _UniverseBuilder:
    def __init__(self, universe: Optional[PlayerUniverse]):
        self.fixed = universe
        self.ids: list[str] = list(universe.ids) if universe else []
        self.index = {p: i for i, p in enumerate(self.ids)}

    def mask(self, text: str, line: int) -> int:
        text = text.strip()
        if not text:
            return 0
        mask = 0
        for raw in text.split(";"):
            p = raw.strip()
            if not p:
                raise FormatError(f"empty player id in {text!r}", line)
            i = self.index.get(p)
            if i is None:
                if self.fixed is not None:
                    raise FormatError(f"unknown player {p!r}", line)
                i = self.index[p] = len(self.ids)
                self.ids.append(p)
            if mask >> i & 1:
                raise FormatError(f"player {p!r} listed twice", line)
            mask |= 1 << i
        return mask

    def universe(self) -> PlayerUniverse:
        if self.fixed is not None:
            return self.fixed
        if not self.ids:
            raise FormatError("file names no players")
        return PlayerUniverse(tuple(self.ids))


def _rows(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise FormatError("file is empty", 1) from None
        if [h.strip() for h in first] != header:
            raise FormatError(f"expected header {','.join(header)}, got {','.join(first)}", 1)
        for line, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise FormatError(f"expected {len(header)} fields, got {len(row)}", line)
            yield line, row


def _float(text: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"not a number: {text!r}", line) from None


def read_performance_csv(path, universe: Optional[PlayerUniverse] = None) -> PerformanceDataset:
    builder = _UniverseBuilder(universe)
    coalitions, values = [], []
    for line, (players, value) in _rows(path, PERFORMANCE_HEADER):
        coalitions.append(builder.mask(players, line))
        values.append(_float(value, line))
    universe = builder.universe()
    return PerformanceDataset(universe, mask_array(coalitions, universe.n),
                              np.array(values, dtype=np.float64))


def write_performance_csv(data: PerformanceDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PERFORMANCE_HEADER)
        for c, v in zip(data.coalitions.tolist(), data.values.tolist()):
            w.writerow([coalition_field(data.universe, c), format_float(v)])


def read_game_csv(path, universe: Optional[PlayerUniverse] = None) -> Game:
    """Read an exact game: every coalition must appear exactly once.

    A non-zero value on the empty coalition is kept but reported with a
    warning, since interaction-weight models always give it 0.
    """
    data = read_performance_csv(path, universe)
    n = data.universe.n
    if len(data) != 1 << n or np.unique(data.coalitions).size != len(data):
        raise FormatError(f"an exact game on {n} players needs each of the {1 << n} coalitions once")
    values = np.empty(1 << n)
    values[data.coalitions] = data.values
    if values[0] != 0.0:
        warnings.warn(f"{path}: empty coalition has value {values[0]!r}", stacklevel=2)
    return Game(data.universe, values)


def write_game_csv(game: Game, path) -> None:
    masks = np.arange(1 << game.n, dtype=np.int64)
    write_performance_csv(PerformanceDataset(game.universe, masks, game.values), path)


def read_matchup_csv(path, universe: Optional[PlayerUniverse] = None) -> MatchupDataset:
    builder = _UniverseBuilder(universe)
    a_list, b_list, won = [], [], []
    for line, (ta, tb, flag) in _rows(path, MATCHUP_HEADER):
        a = builder.mask(ta, line)
        b = builder.mask(tb, line)
        if a == 0 or b == 0:
            raise FormatError("both teams must be non-empty", line)
        if a & b:
            raise FormatError("teams overlap", line)
        flag = flag.strip()
        if flag not in ("0", "1"):
            raise FormatError(f"a_won must be 0 or 1, got {flag!r}", line)
        a_list.append(a)
        b_list.append(b)
        won.append(flag == "1")
    universe = builder.universe()
    return MatchupDataset(universe, mask_array(a_list, universe.n),
                          mask_array(b_list, universe.n), np.array(won, dtype=bool))


def write_matchup_csv(data: MatchupDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MATCHUP_HEADER)
        for a, b, y in zip(data.team_a.tolist(), data.team_b.tolist(), data.a_won.tolist()):
            w.writerow([coalition_field(data.universe, a), coalition_field(data.universe, b), int(y)])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def model_to_dict(model: CgaModel) -> dict:
    out = {
        "players": list(model.universe.ids),
        "order": model.order,
        "weights": {coalition_field(model.universe, m): w
                    for m, w in zip(model.masks.tolist(), model.values.tolist())},
    }
    if model.meta:
        out["meta"] = _jsonable(model.meta)
    return out


def model_from_dict(obj: dict) -> CgaModel:
    try:
        universe = PlayerUniverse(tuple(obj["players"]))
        order = int(obj["order"])
        weights = obj["weights"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"model JSON is missing or has a malformed field: {exc}") from None
    except DomainError as exc:
        raise FormatError(str(exc)) from None
    masks, values = [], []
    for key, w in weights.items():
        ids = [p for p in key.split(";")] if key else []
        try:
            masks.append(universe.mask(ids))
        except DomainError as exc:
            raise FormatError(f"weight key {key!r}: {exc}") from None
        values.append(float(w))
    try:
        return CgaModel(universe, order, mask_array(masks, universe.n),
                        np.array(values, dtype=np.float64), dict(obj.get("meta", {})))
    except DomainError as exc:
        raise FormatError(str(exc)) from None


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=True)


def write_model_json(model: CgaModel, path) -> None:
    Path(path).write_text(dumps(model_to_dict(model)) + "\n", encoding="utf-8")


def read_model_json(path) -> CgaModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return model_from_dict(obj)


def read_allocation_json(path, universe: PlayerUniverse) -> Allocation:
    """Read ``{"player": payoff, ...}`` or ``{"payoffs": {...}}`` for the given universe."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if isinstance(obj, dict) and isinstance(obj.get("payoffs"), dict):
        obj = obj["payoffs"]
    if not isinstance(obj, dict) or set(obj) != set(universe.ids):
        raise FormatError("allocation must map every player id to a payoff")
    return Allocation(universe, [float(obj[p]) for p in universe.ids])


def coalition_sizes(data: PerformanceDataset) -> list[int]:
    return sorted(set(popcount(data.coalitions).tolist()))
