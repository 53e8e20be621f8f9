"""Command-line entry point: ``simulate`` one episode or run a ``montecarlo`` sweep."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .coordination import MessageBus
from .harness import ConfigError, SimConfig, export_episode, export_summary, run_episode, run_monte_carlo


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="castaway-tracking", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config mirroring SimConfig fields")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")

    sim = sub.add_parser("simulate", parents=[common], help="run a single episode")
    sim.add_argument("--trace-bus", action="store_true", help="write every fleet message to bus.jsonl")

    mc = sub.add_parser("montecarlo", parents=[common], help="run repeated episodes over a sweep")
    mc.add_argument("--runs", type=int, default=10)
    mc.add_argument("--sweep-agents", type=_int_list, help="e.g. 1,2,3")
    mc.add_argument("--sweep-targets", type=_int_list, help="e.g. 3,4,5")
    mc.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = SimConfig.from_json(args.config) if args.config else SimConfig()
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        if args.command == "simulate":
            args.out.mkdir(parents=True, exist_ok=True)
            bus = MessageBus(args.out / "bus.jsonl") if args.trace_bus else None
            log = run_episode(cfg, bus=bus)
            files = export_episode(log, args.out)
            m = log.summary()
            print(f"avg_trace={m['avg_trace']:.4f} rmse={m['rmse']:.4f} min_separation={m['min_separation']:.3f}")
            print(f"wrote {', '.join(sorted(p.name for p in files.values()))} to {args.out}")
        else:
            if args.runs < 0:
                raise ConfigError([("--runs", "must be >= 0")])
            table = run_monte_carlo(
                cfg, args.runs, args.sweep_agents, args.sweep_targets, workers=max(1, args.workers)
            )
            path = export_summary(table, args.out / "summary.json", cfg)
            for row in table["rows"]:
                print(
                    f"N={row['n_agents']} C={row['n_castaways']} runs={row['runs']} "
                    f"avg_trace={row['avg_trace']:.4f} rmse={row['rmse']:.4f} "
                    f"min_separation={row['min_separation']:.3f}"
                )
            print(f"wrote {path}")
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for field, msg in exc.problems:
            print(f"  {field}: {msg}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
