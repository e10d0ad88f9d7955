"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(divergence, or too few seeds finishing to aggregate).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import experiments
from .config import SCHEDULE_ENDS, ConfigError, RunConfig, load_config
from .net import NumericalDivergence
from .scene import FULL_GEOMETRY, REDUCED_GEOMETRY, Scene, render, write_pgm
from .training import MissingPretraining

OUT_ENV = "COUNTPOINT_OUT"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _seeds(text: str) -> tuple:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("seeds must be comma-separated integers") from None
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--seeds", type=_seeds, help="comma-separated seeds, e.g. 0,1,2")
    p.add_argument("--jobs", type=int, default=1, help="seeds run in parallel (default 1)")
    p.add_argument("--out", type=Path, help="output root (default $%s or ./runs)" % OUT_ENV)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="countpoint", description="Train and analyse the counting-and-pointing network.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("pretrain", help="gesture then recitation pre-training")
    _common(p)
    p.add_argument("--iterations-gesture", type=int)
    p.add_argument("--iterations-recitation", type=int)

    p = sub.add_parser("study", help="main training for study 1, 2 or 3")
    _common(p)
    p.add_argument("--study", type=int, choices=(1, 2, 3))
    p.add_argument("--schedule-end", choices=sorted(SCHEDULE_ENDS))
    p.add_argument("--iterations", type=int, help="override the study's iteration count")
    p.add_argument("--pretrained", type=Path, help="output root holding pre-training checkpoints (default --out)")
    p.add_argument("--force-fresh", action="store_true", help="start without pre-training when none is found")

    p = sub.add_parser("analyze", help="distance and set-size analyses of study 3 networks")
    _common(p)
    p.add_argument("--rows", choices=("both", "low", "high"), default="both")

    p = sub.add_parser("render", help="write a scene as a PGM image")
    p.add_argument("spec", nargs="?", default="", help='e.g. "balls=2:1,7:3 hand=2 trigger=1"')
    p.add_argument("--out", type=Path, default=Path("scene.pgm"))
    p.add_argument("--geometry", choices=("full", "reduced"), default="full")

    p = sub.add_parser("stats", help="recompute condition statistics from a conditions.csv")
    p.add_argument("csv", type=Path)
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    changes = {}
    if getattr(args, "seeds", None):
        changes["seeds"] = args.seeds
    for attr in ("iterations_gesture", "iterations_recitation"):
        if getattr(args, attr, None) is not None:
            changes[attr] = getattr(args, attr)
    if getattr(args, "study", None) is not None:
        changes["study"] = args.study
    if getattr(args, "iterations", None) is not None:
        changes["iterations_study"] = args.iterations
    if getattr(args, "schedule_end", None):
        changes["schedule_end"] = SCHEDULE_ENDS[args.schedule_end]
    return cfg.replace(**changes)


def out_root(args) -> Path:
    if getattr(args, "out", None) is not None:
        return args.out
    return Path(os.environ.get(OUT_ENV, "runs"))


def parse_scene_spec(spec: str) -> Scene:
    """``balls=c:r,c:r hand=c trigger=0|1``; every field optional."""
    balls, hand, trigger = (), None, False
    pos = 0
    for tok in spec.split():
        start = spec.index(tok, pos)
        pos = start + len(tok)
        key, sep, val = tok.partition("=")
        try:
            if not sep:
                raise ValueError("expected key=value")
            if key == "balls":
                balls = tuple(tuple(int(v) for v in b.split(":")) for b in val.split(",") if b)
                if any(len(b) != 2 for b in balls):
                    raise ValueError("balls are column:row pairs")
            elif key == "hand":
                hand = None if val in ("", "none", "-") else int(val)
            elif key == "trigger":
                if val not in ("0", "1"):
                    raise ValueError("trigger must be 0 or 1")
                trigger = val == "1"
            else:
                raise ValueError("unknown field %r" % key)
        except ValueError as exc:
            raise UsageError("scene spec, column %d (%r): %s" % (start + 1, tok, exc)) from None
    try:
        return Scene(balls, trigger, hand)
    except ValueError as exc:
        raise UsageError("scene spec: %s" % exc) from None


def cmd_render(args) -> int:
    geometry = FULL_GEOMETRY if args.geometry == "full" else REDUCED_GEOMETRY
    scene = parse_scene_spec(args.spec)
    try:
        scene.validate(geometry)
    except ValueError as exc:
        raise UsageError("scene spec: %s" % exc) from None
    write_pgm(args.out, render(scene, geometry))
    print(args.out)
    return EXIT_OK


def cmd_pretrain(args) -> int:
    cfg = resolve_config(args)
    records = experiments.pretrain(cfg, out_root(args), args.jobs)
    for r in records:
        if r.ok:
            acc = {k.label: (round(v.number_accuracy, 3), round(v.gesture_accuracy, 3))
                   for k, v in r.final_summary().items() if k <= 3}
            print("seed %d: %s" % (r.seed, acc))
        else:
            print("seed %d failed: %s" % (r.seed, r.error), file=sys.stderr)
    return EXIT_OK if all(r.ok for r in records) else EXIT_NUMERIC


def cmd_study(args) -> int:
    cfg = resolve_config(args)
    records = experiments.study(cfg, out_root(args), args.jobs, args.pretrained, args.force_fresh)
    print((out_root(args) / ("study%d" % cfg.study) / "summary.csv").read_text(), end="")
    return EXIT_OK if all(r.ok for r in records) else EXIT_NUMERIC


def cmd_analyze(args) -> int:
    cfg = resolve_config(args)
    experiments.analyze(cfg, out_root(args), args.jobs, args.rows)
    print(out_root(args) / "analysis")
    return EXIT_OK


def cmd_stats(args) -> int:
    if not args.csv.exists():
        raise UsageError("no such file: %s" % args.csv)
    for r in experiments.stats_from_conditions(args.csv):
        print(r.line())
    return EXIT_OK


COMMANDS = {"pretrain": cmd_pretrain, "study": cmd_study, "analyze": cmd_analyze,
            "render": cmd_render, "stats": cmd_stats}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("countpoint: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError, MissingPretraining, FileNotFoundError) as exc:
        print("countpoint: error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except (NumericalDivergence, experiments.AggregateError, FloatingPointError) as exc:
        print("countpoint: numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
