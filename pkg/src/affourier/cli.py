"""``affourier`` command line."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import report
from .errors import AffourierError, ValidationError
from .ifs import validate

COMMANDS = ("validate", "fourier", "sweep", "walk", "renewal", "transfer", "props", "report")


def build_parser():
    ap = argparse.ArgumentParser(prog="affourier", description="Fourier decay experiments for self-affine measures.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON config or system file")
    ap.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--budget", type=int, default=None, help="recursion node cap or Monte Carlo sample count")
    ap.add_argument("--method", choices=("recursive", "mc"), default=None)
    return ap


def _emit(obj):
    sys.stdout.write(json.dumps(report._clean(obj), indent=2, sort_keys=True) + "\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = report.read_config(args.config)
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON in {args.config} at line {exc.lineno} column {exc.colno}: {exc.msg}",
              file=sys.stderr)
        return 2
    except (OSError, report.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    seed = int(cfg.get("seed", 0) if args.seed is None else args.seed)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    if args.command == "report":
        code, summary = report.run_report(cfg, out or Path("affourier-report"), seed, args.method, args.budget)
        _emit({"errors": summary["errors"], "warnings": summary["warnings"]})
        return code

    try:
        system = validate(report.load_config_system(cfg))
    except ValidationError as exc:
        _emit({"valid": False, "violations": [{"kind": k, "message": m} for k, m in exc.violations]})
        return 1
    except (AffourierError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, report.ConfigError) or not isinstance(exc, AffourierError) else 1

    try:
        if args.command == "validate":
            res = {"valid": True, **report.stage_validate(system)}
        elif args.command == "fourier":
            res = report.stage_fourier(system, cfg, out, seed, args.method, args.budget)
        elif args.command == "sweep":
            props = report.stage_props(system, cfg, seed)
            res = report.stage_sweep(system, cfg, out, seed, args.method, args.budget, props["verdicts"])
        elif args.command == "walk":
            res = report.stage_walk(system, cfg, out, seed)[0]
        elif args.command == "renewal":
            res = report.stage_renewal(system, cfg, out, seed)
        elif args.command == "transfer":
            res = report.stage_transfer(system, cfg, out, seed)
        else:
            res = report.stage_props(system, cfg, seed)
    except (AffourierError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if out is not None:
        report.write_json(out / f"{args.command}.json", res)
    _emit(res)
    return 0


if __name__ == "__main__":
    sys.exit(main())
