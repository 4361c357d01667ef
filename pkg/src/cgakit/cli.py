"""Command line interface.

Every subcommand prints one JSON report envelope (command, input digests,
seed, UTC timestamp, payload).  Exit codes: 0 success, 2 format/domain
error, 3 capacity error, 4 numerical failure, 1 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import analysis, formats
from .allocation import SampleBudget, sampled_least_core_value
from .errors import CgaError, DomainError
from .estimation import (
    FitConfig,
    fit_bradley_terry,
    fit_least_squares,
    fit_lowrank_pairwise,
    pairwise_to_cga,
)
from .experiments import CompletionQuery, best_completion, score_team_percentile, simulate_game
from .game import (
    Game,
    group_shapley,
    random_cga,
    shapley_bruteforce,
    shapley_from_weights,
)
from .identification import check_identifiability, misspec_error, misspec_spectrum


@dataclass
class ReportEnvelope:
    command: str
    payload: object
    seed: object = None
    input_digests: dict = field(default_factory=dict)
    timestamp: str = ""

    def to_json(self) -> str:
        return formats.dumps({
            "command": self.command, "input_digests": self.input_digests, "seed": self.seed,
            "timestamp": self.timestamp, "payload": self.payload,
        })


def file_digest(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_game_like(args, digests):
    if getattr(args, "model", None):
        digests[str(args.model)] = file_digest(args.model)
        return formats.read_model_json(args.model)
    if getattr(args, "game", None):
        digests[str(args.game)] = file_digest(args.game)
        return formats.read_game_csv(args.game)
    raise DomainError("one of --model or --game is required")


def _ids(text: str) -> list[str]:
    return [p.strip() for p in text.split(";") if p.strip()] if text else []


def _groups(text: str) -> list[list[str]]:
    return [_ids(part) for part in text.split("|")]


def cmd_fit(args, digests):
    digests[str(args.data)] = file_digest(args.data)
    data = formats.read_performance_csv(args.data)
    if args.method == "least-squares":
        model = fit_least_squares(data, args.order, args.l2)
    else:
        cfg = FitConfig(l2=args.l2, rank=args.rank, learning_rate=args.lr, epochs=args.epochs,
                        batch_size=args.batch_size, seed=args.seed)
        low = fit_lowrank_pairwise(data, cfg)
        model = pairwise_to_cga(low)
        model.meta.update({"w": low.w, "factors_left": low.factors_left,
                           "factors_right": low.factors_right})
    return formats.model_to_dict(model)


def cmd_fit_matchups(args, digests):
    digests[str(args.data)] = file_digest(args.data)
    data = formats.read_matchup_csv(args.data)
    cfg = FitConfig(l2=args.l2, learning_rate=args.lr, epochs=args.epochs,
                    batch_size=args.batch_size, seed=args.seed)
    return formats.model_to_dict(fit_bradley_terry(data, args.order, cfg))


def cmd_shapley(args, digests):
    g = _load_game_like(args, digests)
    if args.groups:
        alloc = group_shapley(g, _groups(args.groups))
    elif isinstance(g, Game):
        alloc = shapley_bruteforce(g)
    else:
        alloc = shapley_from_weights(g)
    return {"shapley": alloc.as_dict(), "grouped": bool(args.groups)}


def cmd_identify(args, digests):
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    return check_identifiability(args.n, args.k, sizes, exact=args.exact).to_dict()


def cmd_misspec(args, digests):
    report = misspec_spectrum(args.n, args.k, args.r).to_dict()
    if args.seed is not None:
        true = random_cga(args.n, args.r, args.seed)
        err = misspec_error(args.n, args.k, args.r, true)
        report["error_vector"] = err.error_vector
        report["error_norm"] = float(np.linalg.norm(err.error_vector))
    return report


def _random_pair(rng, n):
    v = rng.normal(size=1 << n)
    return v, v - rng.normal(size=1 << n)


def cmd_bounds(args, digests):
    n = args.n
    rows = []
    if args.mode == "spectrum":
        payload = analysis.spectrum(n).to_dict()
    elif args.mode in ("mc-l2", "mc-l1"):
        cfg = analysis.NoiseExperiment(n, "L2" if args.mode == "mc-l2" else "L1", args.radius,
                                       args.trials, args.seed)
        res = analysis.mc_average_case(cfg, keep_trials=bool(args.csv))
        payload = res.to_dict()
        if args.csv:
            rows = [{"trial": i, "value": formats.format_float(x)} for i, x in enumerate(res.per_trial)]
    else:
        rng = np.random.default_rng(args.seed)
        held, worst = 0, 0.0
        for t in range(args.trials):
            v, vhat = _random_pair(rng, n)
            if args.mode == "worst-l2":
                chk = analysis.l2_worst_bound(v, vhat)
            else:
                chk = analysis.l1_bounds(v, vhat).general
            held += chk.holds
            worst = max(worst, chk.lhs / chk.rhs)
            rows.append({"trial": t, "lhs": formats.format_float(chk.lhs),
                         "rhs": formats.format_float(chk.rhs), "holds": int(chk.holds)})
        payload = {"mode": args.mode, "n": n, "trials": args.trials, "held": held,
                   "max_ratio": worst}
    if args.csv and rows:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return payload


def cmd_least_core(args, digests):
    g = _load_game_like(args, digests)
    if args.allocation == "shapley":
        x = shapley_bruteforce(g) if isinstance(g, Game) else shapley_from_weights(g)
    else:
        digests[str(args.allocation)] = file_digest(args.allocation)
        x = formats.read_allocation_json(args.allocation, g.universe)
    budget = SampleBudget(args.delta, args.failure_prob, args.samples, args.seed)
    return sampled_least_core_value(g, x, budget).to_dict()


def cmd_complete_team(args, digests):
    g = _load_game_like(args, digests)
    u = g.universe
    base = u.mask(_ids(args.base))
    pool = u.mask(_ids(args.pool)) if args.pool else u.grand & ~base
    team, score = best_completion(CompletionQuery(g, base, args.slots, pool))
    return {"team": u.players(team), "added": u.players(team & ~base), "score": score}


def cmd_percentile(args, digests):
    g = _load_game_like(args, digests)
    team = g.universe.mask(_ids(args.team))
    size = args.team_size or bin(team).count("1")
    pct = score_team_percentile(g, team, args.random_teams, size, args.seed)
    return {"team": g.universe.players(team), "team_size": size, "percentile": pct}


def cmd_simulate(args, digests):
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else None
    data_path, model_path = simulate_game(args.n, args.k, args.seed, args.noise_sd, args.out,
                                          sizes=sizes, weight_scale=args.weight_scale,
                                          repeats=args.repeats)
    return {"data": str(data_path), "model": str(model_path),
            "data_digest": file_digest(data_path), "model_digest": file_digest(model_path)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cgakit", description=__doc__.splitlines()[0])
    p.add_argument("--output", help="write the report to this file instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)

    def source(sp):
        grp = sp.add_mutually_exclusive_group(required=True)
        grp.add_argument("--model", help="CGA model JSON")
        grp.add_argument("--game", help="exact game CSV")

    s = sub.add_parser("fit", help="fit a CGA model to a performance CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--order", type=int, default=2)
    s.add_argument("--method", choices=["least-squares", "lowrank"], default="least-squares")
    s.add_argument("--l2", type=float, default=0.0)
    s.add_argument("--rank", type=int, default=1)
    s.add_argument("--lr", type=float, default=1e-2)
    s.add_argument("--epochs", type=int, default=200)
    s.add_argument("--batch-size", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("fit-matchups", help="fit a Bradley-Terry CGA model to a matchup CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--order", type=int, choices=[1, 2], default=1)
    s.add_argument("--l2", type=float, default=0.0)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--batch-size", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_fit_matchups)

    s = sub.add_parser("shapley", help="Shapley values of a model or exact game")
    source(s)
    s.add_argument("--groups", help="partition as 'a;b|c;d'; values are computed within groups")
    s.set_defaults(func=cmd_shapley)

    s = sub.add_parser("identify", help="rank test for observing all coalitions of given sizes")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--sizes", required=True, help="comma separated team sizes")
    s.add_argument("--exact", action="store_true", help="also compute the exact integer rank")
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("bounds", help="Shapley error-propagation checks")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--mode", choices=["worst-l2", "l1", "mc-l2", "mc-l1", "spectrum"], required=True)
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--csv", help="write per-trial values to this CSV")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("least-core", help="sampled least-core value at an allocation")
    source(s)
    s.add_argument("--allocation", default="shapley", help="'shapley' or an allocation JSON file")
    s.add_argument("--samples", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--failure-prob", type=float, default=0.1)
    s.set_defaults(func=cmd_least_core)

    s = sub.add_parser("complete-team", help="best players to add to a partial team")
    source(s)
    s.add_argument("--base", default="", help="';'-joined ids already on the team")
    s.add_argument("--pool", help="';'-joined candidate ids (default: everyone else)")
    s.add_argument("--slots", type=int, required=True)
    s.set_defaults(func=cmd_complete_team)

    s = sub.add_parser("percentile", help="share of random teams that score below a team")
    source(s)
    s.add_argument("--team", required=True)
    s.add_argument("--random-teams", type=int, default=1000)
    s.add_argument("--team-size", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_percentile)

    s = sub.add_parser("simulate", help="write a synthetic performance dataset and its model")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise-sd", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.add_argument("--sizes", help="comma separated coalition sizes")
    s.add_argument("--weight-scale", type=float, default=1.0)
    s.add_argument("--repeats", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("misspec", help="misspecification error of an order-k fit to order-r games")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--seed", type=int, help="also report the error vector of a random order-r game")
    s.set_defaults(func=cmd_misspec)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    digests: dict = {}
    try:
        payload = args.func(args, digests)
    except CgaError as exc:
        print(f"cgakit {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"cgakit {args.command}: {exc}", file=sys.stderr)
        return 1
    env = ReportEnvelope(args.command, payload, getattr(args, "seed", None), digests,
                         datetime.now(timezone.utc).isoformat(timespec="seconds"))
    text = env.to_json() + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
