"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage or input error, 3 format error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .arena.elo import fit_elo, rating_table_csv
from .arena.encoding import encode_planes, movement_posenc
from .arena.game import ONGOING, GameState, apply_move, legal_moves, move_list
from .arena.puzzles import dumps_puzzles, eval_puzzles, generate_puzzles, loads_puzzles
from .arena.tournament import GameResultSet, round_robin
from .charts import render_svg, series_from_csv, series_to_csv
from .decomp import verify_identity
from .errors import ConfigError, FormatError, InputError, LensError
from .lens import dumps_report, lens_sweep, loads_report, normalize_mode, stage_label
from .metrics import report_metrics, solve_dynamics
from .model import ModelConfig, init_model, prepare_input
from .weights_io import atomic_write_text, load_weights, save_weights

log = logging.getLogger("postln_lens")


class VerifyFailed(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from None


def _write_manifest(target: Path, args: argparse.Namespace, started: float, **extra) -> None:
    if target.suffix:
        manifest = target.with_name(target.name + ".manifest.json")
    else:
        manifest = target / "manifest.json"
    doc = {
        "command": args.command_name,
        "config": getattr(args, "config", None),
        "seed": getattr(args, "seed", None),
        "inputs": {k: getattr(args, k) for k in ("weights", "positions", "puzzles", "report", "results", "metrics")
                   if getattr(args, k, None) is not None},
        "output": str(target),
        "tool_version": __version__,
        "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_seconds": round(time.time() - started, 3),
        **extra,
    }
    atomic_write_text(manifest, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _load_config(path: str | None, seed: int) -> ModelConfig:
    if path is None:
        return ModelConfig(seed=seed)
    try:
        d = json.loads(_read(path))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    d["seed"] = seed
    try:
        return ModelConfig.from_dict(d)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def _load_positions(path: str) -> tuple[list, list[GameState]]:
    ids, states = [], []
    for lineno, line in enumerate(_read(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            states.append(GameState.from_string(d["board"], d.get("stm", "w"),
                                                int(d.get("ply", 0)), int(d.get("halfmove", 0))))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path} line {lineno}: {e!r}") from None
        ids.append(d.get("id", len(ids)))
    if not states:
        raise InputError(f"{path} holds no positions")
    for pid, s in zip(ids, states):
        if s.outcome != ONGOING:
            raise InputError(f"position {pid} is terminal ({s.outcome})")
    return ids, states


def _parse_stages(text: str, n_layers: int) -> list[int]:
    if text == "all":
        return list(range(-1, n_layers))
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok == "input":
            out.append(-1)
        elif tok == "full":
            out.append(n_layers - 1)
        else:
            try:
                out.append(int(tok[1:] if tok.startswith("L") else tok))
            except ValueError:
                raise InputError(f"bad stage {tok!r}") from None
    for k in out:
        if not -1 <= k <= n_layers - 1:
            raise InputError(f"stage {k} outside [-1, {n_layers - 1}]")
    return out


def _inputs(w, states):
    pe = movement_posenc()
    return [(prepare_input(encode_planes(s), pe, w), legal_moves(s)) for s in states]


# ---------------------------------------------------------------- commands

def cmd_model_init(args) -> int:
    cfg = _load_config(args.config, args.seed)
    w = init_model(cfg)
    save_weights(args.out, w)
    _write_manifest(Path(args.out), args, args.started, model=cfg.to_dict())
    return 0


def cmd_positions(args) -> int:
    """Random-playout positions (JSON lines) for lens sweeps."""
    rng = np.random.default_rng(args.seed)
    lines = []
    while len(lines) < args.count:
        s = GameState.initial()
        plies = int(rng.integers(0, args.max_plies + 1))
        for _ in range(plies):
            nxt = apply_move(s, move_list(s)[int(rng.integers(len(move_list(s))))])
            if nxt.outcome != ONGOING:
                break
            s = nxt
        lines.append(json.dumps({"id": len(lines), "board": s.board_string(), "stm": s.stm_char,
                                 "ply": s.ply, "halfmove": s.halfmove}, separators=(",", ":")))
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    _write_manifest(Path(args.out), args, args.started, count=args.count)
    return 0


def cmd_lens_sweep(args) -> int:
    w = load_weights(args.weights)
    ids, states = _load_positions(args.positions)
    mode = normalize_mode(args.mode)
    report = lens_sweep(w, _inputs(w, states), mode, position_ids=ids)
    atomic_write_text(args.out, dumps_report(report))
    _write_manifest(Path(args.out), args, args.started, mode=mode, positions_count=len(states),
                    records=len(states) * (w.config.layers + 1))
    return 0


def cmd_decomp_verify(args) -> int:
    w = load_weights(args.weights)
    if not w.config.is_postln:
        raise ConfigError("decomp verify needs a Post-LN/DeepNorm model")
    ids, states = _load_positions(args.positions)
    mode = normalize_mode(args.mode)
    lines = ["position_id,stage,max_abs_err,max_rel_err,norm_i,norm_z_mha,norm_z_ffn,norm_b,norm_m"]
    bad = []
    for pid, (h0, _) in zip(ids, _inputs(w, states)):
        for k in range(-1, w.config.layers):
            r = verify_identity(w, h0, k, mode)
            nm = r.per_term_norms
            row = ",".join([str(pid), str(k), repr(r.max_abs_err), repr(r.max_rel_err),
                            *(repr(nm[t]) for t in ("i_term", "z_mha", "z_ffn", "b_term", "m_term"))])
            lines.append(row)
            if not r.max_rel_err <= args.tol:
                bad.append(row)
    out = args.out or "decomp_verify.csv"
    atomic_write_text(out, "\n".join(lines) + "\n")
    _write_manifest(Path(out), args, args.started, mode=mode, tol=args.tol, failures=len(bad))
    if bad:
        print(f"{len(bad)} rows exceed tol={args.tol}:", file=sys.stderr)
        for row in bad:
            print("  " + row, file=sys.stderr)
        return 1
    return 0


def cmd_metrics(args) -> int:
    report = loads_report(_read(args.report))
    series = report_metrics(report, top_k=args.top_k)
    out = Path(args.out)
    for name, s in series.items():
        atomic_write_text(out / f"{name}.csv", series_to_csv(s))
    _write_manifest(out, args, args.started, top_k=args.top_k, metrics=sorted(series),
                    lens_mode=report.mode)
    return 0


def cmd_chart(args) -> int:
    src = Path(args.metrics)
    files = sorted(src.glob("*.csv"))
    if not files:
        raise InputError(f"no metric CSVs in {src}")
    out = Path(args.out)
    for f in files:
        s = series_from_csv(_read(str(f)), f.stem)
        atomic_write_text(out / f"{f.stem}.svg", render_svg(s))
    _write_manifest(out, args, args.started, charts=[f.stem for f in files])
    return 0


def cmd_puzzles_generate(args) -> int:
    puzzles = generate_puzzles(args.count, args.seed, args.min_plies, args.max_plies)
    atomic_write_text(args.out, dumps_puzzles(puzzles))
    _write_manifest(Path(args.out), args, args.started, count=len(puzzles))
    return 0


def cmd_puzzles_eval(args) -> int:
    w = load_weights(args.weights)
    puzzles = loads_puzzles(_read(args.puzzles))
    if not puzzles:
        raise InputError("no puzzles")
    stages = _parse_stages(args.stages, w.config.layers)
    m = eval_puzzles(w, puzzles, stages, normalize_mode(args.mode))
    n = w.config.layers
    out = Path(args.out)
    labels = [stage_label(k, n) for k in stages]
    rows = ["puzzle," + ",".join(labels)]
    rows += [f"{i}," + ",".join(str(int(v)) for v in row) for i, row in enumerate(m.solved)]
    atomic_write_text(out / "solve_matrix.csv", "\n".join(rows) + "\n")
    dyn = solve_dynamics(m)
    drows = ["stage,label,current,cumulative,converged,first"]
    for j, k in enumerate(stages):
        drows.append(",".join([str(k), labels[j]] + [repr(float(dyn[c][j]))
                                                     for c in ("current", "cumulative", "converged", "first")]))
    atomic_write_text(out / "solve_dynamics.csv", "\n".join(drows) + "\n")
    _write_manifest(out, args, args.started, stages=stages, mode=normalize_mode(args.mode))
    return 0


def cmd_tournament(args) -> int:
    w = load_weights(args.weights)
    stages = _parse_stages(args.stages, w.config.layers)
    res = round_robin(w, stages, args.games, args.opening_plies, args.temperature, args.seed,
                      normalize_mode(args.mode))
    atomic_write_text(args.out, res.to_csv())
    _write_manifest(Path(args.out), args, args.started, stages=stages, games=args.games,
                    opening_plies=args.opening_plies, temperature=args.temperature)
    return 0


def cmd_elo(args) -> int:
    res = GameResultSet.from_csv(_read(args.results))
    if args.anchor:
        name, _, value = args.anchor.partition("=")
        try:
            anchor = (name, float(value or 0.0))
        except ValueError:
            raise InputError(f"bad --anchor {args.anchor!r}; expected id=value") from None
    else:
        anchor = ("full" if "full" in res.participants else res.participants[0], 0.0)
    est = fit_elo(res, prior_games=args.prior_games, anchor=anchor, draw_elo=args.draw_elo,
                  advantage=args.advantage)
    atomic_write_text(args.out, rating_table_csv(est, res))
    _write_manifest(Path(args.out), args, args.started, anchor=list(anchor), draw_elo=args.draw_elo,
                    advantage=args.advantage, prior_games=args.prior_games, sweeps=est.sweeps)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="postln-lens", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="group", required=True)

    def cmd(parent, name, fn, help_):
        sp = parent.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        return sp

    model = sub.add_parser("model", help="model weights").add_subparsers(dest="action", required=True)
    sp = cmd(model, "init", cmd_model_init, "write seeded random LENSW1 weights")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = cmd(sub, "positions", cmd_positions, "random-playout positions as JSON lines")
    sp.add_argument("--count", type=int, default=20)
    sp.add_argument("--max-plies", type=int, default=60)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    lens = sub.add_parser("lens", help="logit lens").add_subparsers(dest="action", required=True)
    sp = cmd(lens, "sweep", cmd_lens_sweep, "per-stage policies for every position")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--positions", required=True)
    sp.add_argument("--mode", default="default", choices=["default", "keep-beta", "keep_beta"])
    sp.add_argument("--out", required=True)

    dec = sub.add_parser("decomp", help="residual decomposition").add_subparsers(dest="action", required=True)
    sp = cmd(dec, "verify", cmd_decomp_verify, "check the closed-form reconstruction")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--positions", required=True)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--mode", default="default", choices=["default", "keep-beta", "keep_beta"])
    sp.add_argument("--out")

    met = sub.add_parser("metrics", help="policy metrics").add_subparsers(dest="action", required=True)
    sp = cmd(met, "compute", cmd_metrics, "percentile bands per metric and stage")
    sp.add_argument("--report", required=True)
    sp.add_argument("--top-k", type=int, default=5)
    sp.add_argument("--out", required=True)

    sp = cmd(sub, "chart", cmd_chart, "SVG charts from metric CSVs")
    sp.add_argument("--metrics", required=True)
    sp.add_argument("--out", required=True)

    puz = sub.add_parser("puzzles", help="forced-win puzzles").add_subparsers(dest="action", required=True)
    sp = cmd(puz, "generate", cmd_puzzles_generate, "harvest puzzles from random playouts")
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--min-plies", type=int, default=2)
    sp.add_argument("--max-plies", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp = cmd(puz, "eval", cmd_puzzles_eval, "solve matrix and solve dynamics per stage")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--puzzles", required=True)
    sp.add_argument("--stages", default="all")
    sp.add_argument("--mode", default="default", choices=["default", "keep-beta", "keep_beta"])
    sp.add_argument("--out", required=True)

    sp = cmd(sub, "tournament", cmd_tournament, "round robin between stages")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--stages", default="all")
    sp.add_argument("--games", type=int, default=10)
    sp.add_argument("--opening-plies", type=int, default=10)
    sp.add_argument("--temperature", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mode", default="default", choices=["default", "keep-beta", "keep_beta"])
    sp.add_argument("--out", required=True)

    sp = cmd(sub, "elo", cmd_elo, "Bayesian Elo fit of a results CSV")
    sp.add_argument("--results", required=True)
    sp.add_argument("--anchor", help="id=value (default: full=0, else first participant)")
    sp.add_argument("--draw-elo", type=float, default=100.0)
    sp.add_argument("--advantage", type=float, default=0.0)
    sp.add_argument("--prior-games", type=float, default=0.5)
    sp.add_argument("--out", required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.started = time.time()
    args.command_name = " ".join(x for x in (args.group, getattr(args, "action", None)) if x)
    try:
        return args.fn(args)
    except LensError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
