"""Command-line entry point: ``adaptive-ems <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import indicators as ind
from .baseline import generate_baseline
from .config import ConfigError, load_config
from .ems import check_alignment, nondominated_union, run
from .profiles import SYNTH_KINDS, ProfileError, load_profile, synth_profile, write_profile
from .reporting import read_baseline, read_front_dump, run_compare, write_baseline, write_outputs

USAGE_ERROR = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {path}")
    return p


def _config(args):
    cfg = load_config(_existing(args.config) if args.config else None)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_baseline(args) -> int:
    cfg = _config(args)
    profile = load_profile(_existing(args.profile))
    records = generate_baseline(
        profile, cfg.ems.initial_battery(), cfg.ems.tick_seconds, cfg.baseline_hold_ticks
    )
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_baseline(records, out)
    print(json.dumps({"baseline": str(out), "ticks": len(records)}))
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    profile = load_profile(_existing(args.profile))
    base = read_baseline(_existing(args.baseline))
    check_alignment(profile, base)
    paced = args.paced or cfg.mode == "paced"
    outcomes = run(profile, base, cfg.ems, paced=paced)
    summary = write_outputs(outcomes, base, cfg, args.out)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    profile = load_profile(_existing(args.profile))
    result = run_compare(profile, cfg, args.out)
    print(json.dumps(result.summary, sort_keys=True))
    return 0


def cmd_indicators(args) -> int:
    fronts = read_front_dump(_existing(args.front_dump))
    if not fronts:
        raise UsageError(f"{args.front_dump}: no front rows")
    ideal = np.vstack(list(fronts.values())).min(axis=0)
    reference_set = nondominated_union(list(fronts.values()))
    rows = []
    for t, F in fronts.items():
        live = np.ptp(F, axis=0) > 1e-12
        G = F[:, live] if live.any() else F[:, :1]
        rows.append(
            {
                "tick": t,
                "size": len(F),
                "hypervolume": ind.hypervolume(G, ind.reference_point(G), seed=t),
                "gd_ideal": ind.gd_ideal(F, ideal),
                "igd": ind.igd(F, reference_set),
                "knee_index": ind.knee_point(F).index if len(F) >= 2 else None,
            }
        )
    print(json.dumps(rows, indent=2))
    return 0


def cmd_synth(args) -> int:
    kind = next((k for k in SYNTH_KINDS if getattr(args, k)), "day")
    samples = synth_profile(kind, n_ticks=args.ticks, tick_seconds=args.tick_seconds, seed=args.seed or 0)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_profile(samples, out)
    print(json.dumps({"profile": str(out), "kind": kind, "ticks": len(samples)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaptive-ems", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the configured seed")

    p = sub.add_parser("baseline", help="rule-based dispatch without optimization")
    p.add_argument("profile")
    p.add_argument("-o", "--output", default="baseline.csv")
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("run", help="optimized arm against an existing baseline file")
    p.add_argument("profile")
    p.add_argument("--baseline", required=True)
    p.add_argument("--paced", action="store_true", help="hold each tick to tick_seconds")
    p.add_argument("--out", default=".")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="baseline and optimized arms on one profile")
    p.add_argument("profile")
    p.add_argument("--out", default=".")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("indicators", help="quality indicators of a front dump")
    p.add_argument("front_dump")
    p.set_defaults(func=cmd_indicators)

    p = sub.add_parser("synth-profile", help="write a synthetic telemetry profile")
    kinds = p.add_mutually_exclusive_group()
    for k in SYNTH_KINDS:
        kinds.add_argument(f"--{k}", action="store_true")
    p.add_argument("out")
    p.add_argument("--ticks", type=int, default=60)
    p.add_argument("--tick-seconds", type=float, default=5.0)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail("usage", str(exc), USAGE_ERROR)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), USAGE_ERROR)
    except ConfigError as exc:
        return _fail("config", str(exc), USAGE_ERROR)
    except ProfileError as exc:
        return _fail("profile", str(exc), 1)
    except (ValueError, RuntimeError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
