"""Command-line entry point: ``approachkit <command> ...``.

Exit codes: 0 when a check passes (or a command just produces output),
2 when a check finds the target not approachable or the property fails,
1 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .conditions import (ConditionReport, default_q_grid, default_y_grid, dual_condition, one_shot_halfspace,
                         primal_condition_orthant)
from .game import GameSpec, game_from_dict, dumps_game, with_monitoring
from .geometry import HalfSpace, Orthant, Polytope, simplex_grid, target_from_dict, target_to_dict
from .kohlberg import auxiliary_game, concavify_game, games_from_dict, nr_vertices, supporting_vector
from .lifting import hidden_halfspace_demo, lift_polytope
from .monitoring import FlagError, has_urc_property
from .strategies import BlockSchedule, Trace, nature_policy, run_blackwell, run_block_signals, run_observed_flags

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
URC_GRID = 20   # 21 points per edge


class InputError(Exception):
    pass


def _read_json(path: str) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_game(args) -> GameSpec:
    try:
        spec = game_from_dict(_read_json(args.game))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{args.game}: invalid game: {exc}") from None
    return with_monitoring(spec, args.monitoring)


def _load_target(args):
    try:
        return target_from_dict(_read_json(args.target))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{args.target}: invalid target: {exc}") from None


def _grid(spec: GameSpec, den: int | None) -> np.ndarray:
    return default_y_grid(spec) if den is None else simplex_grid(spec.n_nature, den)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=1, sort_keys=True))


def _check_exit(rep: ConditionReport) -> int:
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# commands


def cmd_check_dual(args) -> int:
    spec, target = _load_game(args), _load_target(args)
    rep = dual_condition(spec, target, _grid(spec, args.grid), refine=not args.no_refine)
    _emit({"command": "check-dual", "game_hash": spec.fingerprint, "report": rep.to_dict()})
    return _check_exit(rep)


def cmd_check_primal(args) -> int:
    spec, target = _load_game(args), _load_target(args)
    if not isinstance(target, Orthant):
        raise InputError("check-primal needs an orthant target")
    q_grid = default_q_grid(spec.dim) if args.q_grid is None else simplex_grid(spec.dim, args.q_grid)
    rep = primal_condition_orthant(spec, target.a, q_grid, _grid(spec, args.grid), refine=not args.no_refine)
    _emit({"command": "check-primal", "game_hash": spec.fingerprint, "report": rep.to_dict()})
    return _check_exit(rep)


def cmd_check_halfspace(args) -> int:
    spec, target = _load_game(args), _load_target(args)
    if not isinstance(target, HalfSpace):
        raise InputError("check-halfspace needs a halfspace target")
    rep = one_shot_halfspace(spec, target)
    _emit({"command": "check-halfspace", "game_hash": spec.fingerprint, "report": rep.to_dict()})
    return _check_exit(rep)


def cmd_urc(args) -> int:
    spec = _load_game(args)
    xs = simplex_grid(spec.n_player, args.x_grid)
    ys = simplex_grid(spec.n_nature, URC_GRID if args.grid is None else args.grid)
    flags = np.unique(np.round(np.einsum("nj,ijs->nis", ys, spec.signal_law), 12), axis=0)
    ok, wit = has_urc_property(spec, xs, flags)
    out: dict[str, Any] = {"command": "urc", "game_hash": spec.fingerprint, "urc": bool(ok)}
    if wit is not None:
        out["witness"] = {"x": wit.x.tolist(), "flag": wit.flag.tolist(), "corner": wit.corner.tolist(),
                          "gap": float(wit.gap)}
    _emit(out)
    return EXIT_OK if ok else EXIT_FAIL


def _parse_vector(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"cannot parse vector {text!r}") from None


def _threads(jobs: int) -> int:
    env = os.environ.get("APPROACHKIT_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise InputError(f"APPROACHKIT_THREADS must be an integer, got {env!r}") from None
    return max(1, min(cap, jobs))


def simulate(spec: GameSpec, target, strategy: str, nature_kind: str, horizon: int, seeds: Sequence[int],
             nature_y=None, script=None, schedule: BlockSchedule | None = None, grid: int | None = None) -> list[Trace]:
    """Run one trace per seed, in a thread pool capped by ``APPROACHKIT_THREADS``."""
    y_grid = _grid(spec, grid)
    if nature_kind == "fixed" and nature_y is None:
        nature_y = [1.0 / spec.n_nature] * spec.n_nature
    if nature_kind == "script" and not script:
        raise InputError("--nature script needs --script")

    def one(seed: int) -> Trace:
        nature = nature_policy(nature_kind, nature_y, script)
        if strategy == "blackwell":
            return run_blackwell(spec, target, nature, horizon, seed)
        if not isinstance(target, Orthant):
            raise InputError(f"strategy {strategy!r} needs an orthant target")
        if strategy == "observed":
            return run_observed_flags(spec, target.a, nature, horizon, seed, y_grid)
        if strategy == "blocks":
            return run_block_signals(spec, target.a, schedule or BlockSchedule(), nature, horizon, seed, y_grid)
        raise InputError(f"unknown strategy {strategy!r}")

    with ThreadPoolExecutor(max_workers=_threads(len(seeds))) as pool:
        return list(pool.map(one, seeds))


def _checkpoints(horizon: int) -> list[int]:
    pts = [10 ** k for k in range(1, 10) if 10 ** k < horizon]
    return pts + [horizon]


def report(traces: Sequence[Trace] | Sequence[dict], tol: float = 1e-6) -> dict:
    """Quantiles of the distance at decade checkpoints and condition-violation counts.

    Accepts traces or plain dicts with ``n``, ``dist`` and ``condition`` arrays
    (as read back from CSV).
    """
    rows, schedules = [], []
    for t in traces:
        if isinstance(t, Trace):
            if "schedule" in t.header and t.header["schedule"] not in schedules:
                schedules.append(t.header["schedule"])
            names, data = t.columns()
            t = {nm: data[:, k] for k, nm in enumerate(names)}
        rows.append(t)
    if not rows:
        raise ValueError("no traces to report on")
    horizon = min(int(r["n"][-1]) for r in rows)
    out: dict[str, Any] = {"replications": len(rows), "horizon": horizon, "checkpoints": []}
    for n in _checkpoints(horizon):
        dists = np.array([r["dist"][n - 1] for r in rows])
        q = np.quantile(dists, [0.05, 0.5, 0.95])
        entry = {"n": n, "dist_q05": float(q[0]), "dist_median": float(q[1]), "dist_q95": float(q[2])}
        if "dist_R" in rows[0] and not np.isnan(rows[0]["dist_R"][n - 1]):
            entry["dist_R_median"] = float(np.median([r["dist_R"][n - 1] for r in rows]))
        out["checkpoints"].append(entry)
    viol = [int(np.sum(np.nan_to_num(r["condition"], nan=-np.inf) > tol)) for r in rows]
    out["condition_violations"] = viol
    out["condition_violations_total"] = int(sum(viol))
    if schedules:
        out["schedule"] = schedules[0] if len(schedules) == 1 else schedules
    return out


def report_table(summary: dict) -> str:
    """The checkpoint quantiles of a :func:`report` as CSV."""
    cols = ["n", "dist_q05", "dist_median", "dist_q95"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for e in summary["checkpoints"]:
        w.writerow([e["n"]] + [repr(e[c]) for c in cols[1:]])
    return buf.getvalue()


def cmd_simulate(args) -> int:
    spec, target = _load_game(args), _load_target(args)
    if args.horizon < 1 or args.replications < 1:
        raise InputError("horizon and replications must be >= 1")
    script = None
    if args.script is not None:
        script = _read_json(args.script)
    nature_y = _parse_vector(args.nature_y)
    seeds = [args.seed + k for k in range(args.replications)]
    schedule = BlockSchedule(args.block_power, args.explore_power)
    config = {"command": "simulate", "version": __version__, "game_hash": spec.fingerprint,
              "monitoring": args.monitoring, "target": target_to_dict(target), "strategy": args.strategy,
              "nature": args.nature, "nature_y": nature_y, "script": script, "horizon": args.horizon,
              "seed": args.seed, "replications": args.replications, "grid": args.grid}
    if args.strategy == "blocks":
        config["schedule"] = schedule.describe()
    h = config_hash(config)
    traces = simulate(spec, target, args.strategy, args.nature, args.horizon, seeds, nature_y, script, schedule,
                      args.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, (seed, tr) in enumerate(zip(seeds, traces)):
        name = f"trace_{h}_r{k:03d}_seed{seed}.csv"
        (out / name).write_text(tr.to_csv())
        files.append(name)
    summary = {"config": config, "config_hash": h, "seeds": seeds, "traces": files, "report": report(traces),
               "runs": [tr.summary() for tr in traces]}
    (out / f"report_{h}.csv").write_text(report_table(summary["report"]))
    (out / f"summary_{h}.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    _emit({"command": "simulate", "config_hash": h, "out": str(out), "report": summary["report"]})
    return EXIT_OK


def read_trace_csv(path: str) -> dict:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    if len(rows) < 2:
        raise InputError(f"{path}: empty trace")
    head = rows[0]
    for col in ("n", "dist", "condition"):
        if col not in head:
            raise InputError(f"{path}: missing column {col!r}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    return {nm: data[:, k] for k, nm in enumerate(head)}


def cmd_report(args) -> int:
    _emit({"command": "report", "report": report([read_trace_csv(p) for p in args.traces], args.tol)})
    return EXIT_OK


def cmd_lift(args) -> int:
    spec, target = _load_game(args), _load_target(args)
    if not isinstance(target, Polytope):
        raise InputError("lift needs a polytope target")
    lifted = lift_polytope(spec, target)
    out: dict[str, Any] = {"command": "lift", "base_hash": spec.fingerprint,
                           "lifted_hash": lifted.lifted.fingerprint, "target": {"type": "orthant",
                                                                               "a": [0.0] * target.b.size}}
    if args.out:
        Path(args.out).write_text(dumps_game(lifted.lifted) + "\n")
        out["lifted_game"] = args.out
    if args.direction is not None:
        demo = hidden_halfspace_demo(lifted, _parse_vector(args.direction))
        out["hidden_halfspace"] = {"direction": demo.direction.tolist(), "pulled_back": demo.pulled_back.tolist(),
                                   "base_constant": demo.base_constant, "base_sup": demo.base_sup,
                                   "base_passes": demo.base_passes, "lifted_value": demo.lifted_value,
                                   "lifted_verdict": demo.lifted_report.verdict.value}
    _emit(out)
    return EXIT_OK


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def cmd_kohlberg(args) -> int:
    try:
        games = games_from_dict(_read_json(args.games))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{args.games}: invalid games: {exc}") from None
    nr = nr_vertices(games)
    aux = auxiliary_game(games, nr)
    cav = concavify_game(aux, args.points)
    ps = [float(p) for p in _parse_vector(args.beliefs)]
    config = {"command": "kohlberg", "version": __version__, "games_hash": aux.fingerprint,
              "points": args.points, "beliefs": ps}
    h = config_hash(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / f"u_{h}.csv", ["p", "u"], zip(cav.p, cav.u))
    _write_csv(out / f"hull_{h}.csv", ["p", "cav_u"], zip(cav.hull_p, cav.hull_u))
    table = [(p, *supporting_vector(cav, p)) for p in ps]
    _write_csv(out / f"supporting_{h}.csv", ["p", "a0", "a1"], table)
    (out / f"config_{h}.json").write_text(json.dumps({"config": config, "config_hash": h}, indent=1,
                                                     sort_keys=True) + "\n")
    _emit({"command": "kohlberg", "config_hash": h, "nr_vertices": nr.vertices.tolist(),
           "supporting": [{"p": p, "a": [a0, a1]} for p, a0, a1 in table]})
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="approachkit", description="Approachability checks and simulations.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def game_args(p, target=True):
        p.add_argument("--game", required=True, help="game JSON file")
        if target:
            p.add_argument("--target", required=True, help="target JSON file")
        p.add_argument("--monitoring", choices=("full", "dark", "spec"), default="spec",
                       help="override the signal law of the game file")
        p.add_argument("--grid", type=int, default=None, help="denominator of Nature's mixed-action grid")

    p = sub.add_parser("check-dual", help="Nature-side condition for a target")
    game_args(p)
    p.add_argument("--no-refine", action="store_true")
    p.set_defaults(func=cmd_check_dual)

    p = sub.add_parser("check-primal", help="player-side condition for an orthant")
    game_args(p)
    p.add_argument("--q-grid", type=int, default=None, help="denominator of the direction grid")
    p.add_argument("--no-refine", action="store_true")
    p.set_defaults(func=cmd_check_primal)

    p = sub.add_parser("check-halfspace", help="one-shot test for a half-space on raw payoffs")
    game_args(p)
    p.set_defaults(func=cmd_check_halfspace)

    p = sub.add_parser("urc", help="test the upper-right-corner property")
    game_args(p, target=False)
    p.add_argument("--x-grid", type=int, default=URC_GRID)
    p.set_defaults(func=cmd_urc)

    p = sub.add_parser("simulate", help="simulate a strategy against a Nature policy")
    game_args(p)
    p.add_argument("--strategy", choices=("blackwell", "observed", "blocks"), default="blackwell")
    p.add_argument("--nature", choices=("fixed", "script", "best-response"), default="fixed")
    p.add_argument("--nature-y", default=None, help="comma-separated mixed action for --nature fixed")
    p.add_argument("--script", default=None, help="JSON list of mixed actions for --nature script")
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--block-power", type=float, default=1.5)
    p.add_argument("--explore-power", type=float, default=0.25)
    p.add_argument("--out", default="runs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="summarise trace CSV files")
    p.add_argument("traces", nargs="+")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("lift", help="rewrite a polytope target as an orthant")
    game_args(p)
    p.add_argument("--out", default=None, help="where to write the lifted game JSON")
    p.add_argument("--direction", default=None, help="comma-separated q for the hidden half-space comparison")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("kohlberg", help="simultaneous games: NR vertices, u, its envelope, supporting orthants")
    p.add_argument("--games", required=True)
    p.add_argument("--points", type=int, default=65)
    p.add_argument("--beliefs", default="0.1,0.3,0.5,0.7,0.9")
    p.add_argument("--out", default="kohlberg")
    p.set_defaults(func=cmd_kohlberg)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, FlagError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
