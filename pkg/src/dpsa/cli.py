"""Command-line experiment runner.

Subcommands:
  run     execute one configured experiment, write trace.csv and summary.csv
  sweep   rerun a config while varying one field, write a comparison table
  verify  run the built-in acceptance suite (pass/fail per criterion)

Exit codes: 0 success, 1 verification failure, 2 config error, 3 runtime
error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import ExperimentConfig, config_from_raw, read_ini
from .errors import ConfigError


def _apply_master_seed(raw: dict, seed: int) -> None:
    # One flag reseeds every randomness source with distinct derived values.
    raw.setdefault("data", {})["seed"] = str(seed)
    raw.setdefault("network", {})["seed"] = str(seed + 1)
    raw.setdefault("algorithm", {})["init_seed"] = str(seed + 2)
    raw.setdefault("harness", {})["straggler_seed"] = str(seed + 3)


def _load(args) -> ExperimentConfig:
    raw = read_ini(args.config)
    if args.seed is not None:
        _apply_master_seed(raw, args.seed)
    if args.transport is not None:
        raw.setdefault("harness", {})["transport"] = args.transport
    return config_from_raw(raw)


def _write_summary(path: Path, summary: dict) -> None:
    keys = list(summary)

    def fmt(v) -> str:
        if isinstance(v, float):
            return f"{v:.17g}"
        return str(v)

    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        fh.write(",".join(fmt(summary[k]) for k in keys) + "\n")


def cmd_run(args) -> int:
    from .simharness import run_experiment

    cfg = _load(args)
    out = Path(args.out if args.out is not None else cfg.harness.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _est, trace, summary = run_experiment(cfg)
    trace.to_csv(out / "trace.csv")
    _write_summary(out / "summary.csv", summary)
    print(f"wrote {out / 'trace.csv'} and {out / 'summary.csv'}")
    print(f"final mean error {summary['final_mean_error']:.3e}  "
          f"mean P2P/node {summary['mean_p2p_per_node']:.1f}  "
          f"simulated {summary['simulated_seconds']:.2f}s")
    return 0


def _sanitize(value: str) -> str:
    return "".join(c if c.isalnum() or c in "-._" else "_" for c in value)


def cmd_sweep(args) -> int:
    from .simharness import run_experiment

    if not args.value:
        raise ConfigError("--value", "at least one value required")
    if "." not in args.axis:
        raise ConfigError("--axis", "expected section.key, e.g. algorithm.schedule")
    section, key = args.axis.split(".", 1)
    out = Path(args.out if args.out is not None else ".")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in args.value:
        raw = read_ini(args.config)
        if args.seed is not None:
            _apply_master_seed(raw, args.seed)
        if args.transport is not None:
            raw.setdefault("harness", {})["transport"] = args.transport
        raw.setdefault(section, {})[key] = value
        cfg = config_from_raw(raw)
        _est, trace, summary = run_experiment(cfg)
        name = f"trace_{_sanitize(value)}.csv"
        trace.to_csv(out / name)
        rows.append((value, summary["final_mean_error"],
                     summary["mean_p2p_per_node"], summary["total_p2p"]))
        print(f"{args.axis}={value}: final error {summary['final_mean_error']:.3e}, "
              f"mean P2P/node {summary['mean_p2p_per_node']:.1f}")
    with open(out / "comparison.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "final_mean_error", "mean_p2p_per_node",
                         "total_p2p"])
        for value, err, mean_p2p, total in rows:
            writer.writerow([value, f"{err:.17g}", f"{mean_p2p:.17g}", total])
    print(f"wrote {out / 'comparison.csv'}")
    return 0


def cmd_verify(args) -> int:
    from .acceptance import run_all

    results = run_all(base_port=args.base_port)
    failed = [r for r in results if not r.passed]
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dpsa",
        description="Distributed principal subspace analysis experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment from a config file")
    run_p.add_argument("--config", required=True, help="INI config path")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--seed", type=int, default=None,
                       help="master seed override (reseeds data/network/init/straggler)")
    run_p.add_argument("--transport", choices=("inprocess", "sockets"), default=None)
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a config across values of one field")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--out", default=None)
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.add_argument("--transport", choices=("inprocess", "sockets"), default=None)
    sweep_p.add_argument("--axis", required=True, help="config field, e.g. algorithm.schedule")
    sweep_p.add_argument("--value", action="append", default=[],
                         help="one value per flag; repeat for multiple")
    sweep_p.set_defaults(func=cmd_sweep)

    verify_p = sub.add_parser("verify", help="run the acceptance suite")
    verify_p.add_argument("--base-port", type=int, default=56901,
                          help="first localhost port for the socket checks")
    verify_p.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to exit 3
        if args.command == "verify":
            raise
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
