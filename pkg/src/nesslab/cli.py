"""Command-line entry point: ``nesslab {run,sweep,oracle,gk,ldf,kmp} --config PATH``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from .config import ConfigError, ExperimentConfig, parse_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
STUDIES = ("run", "sweep", "oracle", "gk", "ldf", "kmp")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nesslab", description="Heat conduction in oscillator lattices.")
    sub = p.add_subparsers(dest="study", required=True)
    for name in STUDIES:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file (defaults are used when omitted)")
        s.add_argument("--seed", type=int, help="64-bit seed overriding the config")
        s.add_argument("--out", help="output directory overriding the config")
        s.add_argument("--replicas", type=int, help="number of replicas")
        s.add_argument("--jobs", type=int, help="worker processes (env NESSLAB_JOBS)")
        s.add_argument("--no-resume", action="store_true", help="ignore an existing checkpoint")
    return p


def load(args) -> ExperimentConfig:
    text = "{}"
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    data = json.loads(text) if text.strip() else {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data["study"] = args.study
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["output"] = args.out
    if args.replicas is not None:
        data.setdefault("params", {})["replicas"] = args.replicas
    return parse_config(json.dumps(data))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load(args)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    jobs = args.jobs if args.jobs is not None else int(os.environ.get("NESSLAB_JOBS", "1"))
    if jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    from .runner import run_experiment
    try:
        rec = run_experiment(cfg, jobs=jobs, resume=not args.no_resume)
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps({"status": rec["status"], "output": cfg.output,
                      "observables": rec["observables"]}, sort_keys=True, default=str))
    return EXIT_OK if rec["status"] == "ok" else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
