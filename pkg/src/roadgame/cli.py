"""Command-line entry point: ``roadgame <command> ...``.

Exit codes: 0 success or property holds, 1 property fails or scenario
invalid, 2 usage or input error, 3 unrealizable, 4 configuration error.

When ``--config`` is not given, a file named like the scenario with the
suffix ``.ini`` is used if it exists beside it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import (ConfigError, ControllerUndefined, GridTooCoarse, NotWinning, RoadgameError, SchemaError,
                     ScenarioError, Unrealizable, UnsupportedFeature)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNREALIZABLE, EXIT_CONFIG = 0, 1, 2, 3, 4


class _Usage(Exception):
    pass


def _err(msg: str) -> None:
    print(f"roadgame: {msg}", file=sys.stderr)


def _read_text(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _Usage(f"cannot read {path}: {exc.strerror}") from None


def _write_text(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _scenario(path):
    from .scenario import parse_scenario, validate_scenario

    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise _Usage(f"cannot read {path}: {exc.strerror}") from None
    sc = parse_scenario(data)
    diags = validate_scenario(sc)
    if diags:
        raise ScenarioError("; ".join(str(d) for d in diags))
    return sc


def _config(args, path):
    from .config import load_config

    cfg_path = getattr(args, "config", None)
    if cfg_path is None and path is not None:
        sibling = Path(path).with_suffix(".ini")
        if sibling.exists():
            cfg_path = sibling
    overrides = {
        "grid": {k: getattr(args, k, None) for k in ("nx", "ny", "ntheta", "nv", "horizon")},
        "learn": {k: getattr(args, k, None) for k in ("episodes", "seed")},
        "synth": {"mode": getattr(args, "mode", None)},
    }
    return load_config(cfg_path, overrides)


def _load_strategy(path):
    """Permissive, Q-tree or decision-tree strategy, chosen by its format field."""
    from .game import STRATEGY_FORMAT, strategy_from_json
    from .qtree import DTREE_FORMAT, QTREE_FORMAT, dtree_from_json, strategy_from_json as qtree_from_json

    text = _read_text(path)
    try:
        fmt = json.loads(text).get("format")
    except (json.JSONDecodeError, AttributeError):
        raise SchemaError("/", f"{path} is not a JSON object") from None
    if fmt == STRATEGY_FORMAT:
        return "permissive", strategy_from_json(text)
    if fmt == QTREE_FORMAT:
        return "qtree", qtree_from_json(text)
    if fmt == DTREE_FORMAT:
        return "dtree", dtree_from_json(text)
    raise SchemaError("/format", f"unknown strategy format {fmt!r}")


def _controller(strategy_path, shield_path=None):
    from .check import Greedy, Permissive, Tree

    kind, obj = _load_strategy(strategy_path)
    if kind == "permissive":
        return Permissive(obj), obj
    shield = None
    if shield_path is not None:
        skind, shield = _load_strategy(shield_path)
        if skind != "permissive":
            raise SchemaError("/format", "--shield needs a permissive strategy")
    if kind == "qtree":
        return Greedy(obj, shield), shield
    return Tree(obj), shield


def _params_of(cfg, ps=None):
    return ps.params if ps is not None and ps.params is not None else cfg.dynamics


# ---------------------------------------------------------------------------
# commands

def cmd_parse(args) -> int:
    from .scenario import parse_scenario, validate_scenario

    try:
        with open(args.scenario, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise _Usage(f"cannot read {args.scenario}: {exc.strerror}") from None
    sc = parse_scenario(data)
    diags = validate_scenario(sc)
    for d in diags:
        print(f"{args.scenario}: {d}", file=sys.stderr)
    if diags:
        return EXIT_FAIL
    print(f"{args.scenario}: valid ({len(sc.lanelets)} lanelets, {len(sc.obstacles)} obstacles, "
          f"{len(sc.planning_problems)} planning problems)")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .game import build_game, save_permissive, solve_safety

    sc = _scenario(args.scenario)
    cfg = _config(args, args.scenario)
    g = cfg.grid_spec(sc)
    gg = build_game(sc, g, cfg.dynamics, cfg.mode)
    ps = solve_safety(gg)
    save_permissive(ps, args.out)
    n_win = int(ps.winning.sum())
    print(f"safe strategy: {n_win} winning abstract states of {ps.masks.size}; written to {args.out}")
    return EXIT_OK


def cmd_learn(args) -> int:
    from .game import load_permissive
    from .learning import jsonl_logger, learn, qtable_to_qtrees
    from .qtree import save_strategy

    sc = _scenario(args.scenario)
    cfg = _config(args, args.scenario)
    if cfg.learn.episodes < 1:
        raise ConfigError("episodes must be at least 1")
    shield = None
    if args.shield:
        try:
            shield = load_permissive(args.shield)
        except OSError as exc:
            raise _Usage(f"cannot read {args.shield}: {exc.strerror}") from None
        if shield.grid is None:
            raise SchemaError("/grid", "shield strategy carries no grid")
    grid = shield.grid if shield is not None else cfg.grid_spec(sc)
    p = _params_of(cfg, shield)
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        qt = learn(sc, cfg.learn, shield=shield, p=p, grid=grid,
                   log=jsonl_logger(log_fh) if log_fh else None)
    finally:
        if log_fh:
            log_fh.close()
    save_strategy(qtable_to_qtrees(qt, grid), args.out)
    st = qt.stats
    print(f"episodes {st['episodes']}, steps {st['steps']}, violations {st['violations']}, "
          f"goals {st['goals']}; written to {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .check import check_exists_safe, check_goal_under, check_safety_under, write_trace_jsonl

    sc = _scenario(args.scenario)
    cfg = _config(args, args.scenario)
    if args.query == "exists":
        g = cfg.grid_spec(sc)
        v = check_exists_safe(sc, cfg.dynamics, g)
        horizon = g.horizon
    else:
        if not args.strategy:
            raise _Usage(f"--query {args.query} needs --strategy")
        ctrl, ps = _controller(args.strategy, args.shield)
        p = _params_of(cfg, ps)
        horizon = args.horizon or (ps.grid.horizon if ps is not None and ps.grid is not None
                                   else cfg.grid_spec(sc).horizon)
        check = check_safety_under if args.query == "safe" else check_goal_under
        try:
            v = check(sc, ctrl, p, horizon)
        except ControllerUndefined as exc:
            print(f"{args.query}: fails, controller undefined: {exc}")
            return EXIT_FAIL
    print(f"{args.query}: {'holds' if v.holds else 'fails'} ({v.states_explored} states, horizon {horizon})")
    trace = v.trace_records() if (v.counterexample or v.witness) else None
    if args.trace and trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            write_trace_jsonl(trace, fh)
        print(f"{'counterexample' if not v.holds else 'witness'} written to {args.trace}")
    return EXIT_OK if v.holds else EXIT_FAIL


def cmd_simulate(args) -> int:
    from .check import inject_trajectory, simulate, trajectory_to_json
    from .scenario import save_scenario

    sc = _scenario(args.scenario)
    cfg = _config(args, args.scenario)
    ctrl, ps = _controller(args.strategy, args.shield)
    p = _params_of(cfg, ps)
    horizon = args.horizon or (ps.grid.horizon if ps is not None and ps.grid is not None
                               else cfg.grid_spec(sc).horizon)
    try:
        tr = simulate(sc, ctrl, p, args.seed, horizon)
    except ControllerUndefined as exc:
        _err(f"controller undefined during simulation: {exc}")
        return EXIT_FAIL
    _write_text(args.out, trajectory_to_json(tr))
    print(f"{len(tr.states)} states written to {args.out}")
    if args.inject:
        save_scenario(inject_trajectory(sc, tr), args.inject)
        print(f"scenario with the ego as obstacle written to {args.inject}")
    return EXIT_OK


def cmd_render(args) -> int:
    from .check import trajectory_from_json
    from .render import write_frames

    sc = _scenario(args.scenario)
    cfg = _config(args, args.scenario)
    tr = trajectory_from_json(_read_text(args.trajectory)) if args.trajectory else None
    manifest = write_frames(sc, args.out, tr, cfg.dynamics)
    print(f"frames and manifest written to {manifest.parent}")
    return EXIT_OK


def cmd_to_uppaal(args) -> int:
    from .uppaal import write_uppaal

    sc = _scenario(args.scenario)
    cfg = _config(args, args.scenario)
    out_dir = args.out_dir or Path(args.scenario).parent
    model, query = write_uppaal(sc, out_dir, Path(args.scenario).stem, cfg.dynamics, cfg.grid_spec(sc))
    print(f"model {model}\nqueries {query}")
    return EXIT_OK


def cmd_dtree(args) -> int:
    from .qtree import count_nodes, dtree_to_json, export_dot, qtrees_to_decision_tree

    kind, qs = _load_strategy(args.strategy)
    if kind != "qtree":
        raise SchemaError("/format", "dtree needs a Q-tree strategy")
    dt = qtrees_to_decision_tree(qs)
    _write_text(args.out, dtree_to_json(dt))
    if args.dot:
        _write_text(args.dot, export_dot(dt))
    inner, leaves = count_nodes(dt.root)
    print(f"decision tree with {inner} branches and {leaves} leaves written to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _grid_flags(sp):
    sp.add_argument("--config", help="INI configuration file (default: SCENARIO with suffix .ini, if present)")
    sp.add_argument("--horizon", type=int, help="MAXT, decision periods")
    for name in ("nx", "ny", "ntheta", "nv"):
        sp.add_argument(f"--{name}", type=int, help=f"grid cells along {name[1:]}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="roadgame", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"roadgame {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("parse", help="validate a scenario file")
    sp.add_argument("scenario")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("synth", help="synthesize the permissive safety strategy")
    sp.add_argument("scenario")
    sp.add_argument("--out", required=True, help="strategy JSON file")
    sp.add_argument("--mode", choices=("center", "corners"))
    _grid_flags(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("learn", help="Q-learning for the goal, optionally shielded")
    sp.add_argument("scenario")
    sp.add_argument("--out", required=True, help="Q-tree strategy JSON file")
    sp.add_argument("--shield", help="permissive strategy restricting every choice")
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--log", help="JSON-lines file, one record per transition")
    _grid_flags(sp)
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("verify", help="check a closed-loop property")
    sp.add_argument("scenario")
    sp.add_argument("--query", required=True, choices=("safe", "goal", "exists"))
    sp.add_argument("--strategy", help="strategy JSON (permissive, Q-tree or decision tree)")
    sp.add_argument("--shield", help="permissive strategy applied to a Q-tree strategy")
    sp.add_argument("--trace", help="write the counterexample or witness as JSON lines")
    _grid_flags(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("simulate", help="seeded closed-loop rollout")
    sp.add_argument("scenario")
    sp.add_argument("--strategy", required=True)
    sp.add_argument("--shield")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="trajectory JSON file")
    sp.add_argument("--inject", help="write the scenario with the trajectory added as an obstacle")
    _grid_flags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("render", help="SVG frames per time step plus a manifest")
    sp.add_argument("scenario")
    sp.add_argument("--trajectory", help="trajectory JSON drawn as the ego")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("to-uppaal", help="emit UPPAAL model and query files")
    sp.add_argument("scenario")
    sp.add_argument("--out-dir", help="output directory (default: beside the scenario)")
    _grid_flags(sp)
    sp.set_defaults(func=cmd_to_uppaal)

    sp = sub.add_parser("dtree", help="convert a Q-tree strategy to one decision tree")
    sp.add_argument("--strategy", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--dot", help="also write Graphviz text")
    sp.set_defaults(func=cmd_dtree)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Usage as exc:
        _err(str(exc))
        return EXIT_USAGE
    except ScenarioError as exc:
        _err(f"invalid scenario: {exc}")
        return EXIT_FAIL
    except (SchemaError, UnsupportedFeature) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (Unrealizable, NotWinning) as exc:
        msg = str(exc)
        _err(msg if msg.startswith("no safe path") else f"no safe path: {msg}")
        return EXIT_UNREALIZABLE
    except (ConfigError, GridTooCoarse) as exc:
        _err(f"configuration: {exc}")
        return EXIT_CONFIG
    except RoadgameError as exc:
        _err(str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
