"""Command line: simulate <scenario> --config <path> [--out DIR] [--format json|csv] [--seed N]."""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError
from .config import SCENARIO_NAMES, default_config, load_config
from .records import emit
from .scenarios import run_scenario

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description="Run one numerical scenario and record it.")
    p.add_argument("scenario", choices=SCENARIO_NAMES)
    p.add_argument("--config", help="INI file; omitted keys take the scenario defaults")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--format", choices=("json", "csv"), help="record format (overrides [output] format)")
    p.add_argument("--seed", type=int, help="64-bit seed for sampled test vectors")
    p.add_argument("--dump-config", action="store_true", help="print the default INI for the scenario and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.dump_config:
        print(default_config(args.scenario).to_ini(), end="")
        return 0
    try:
        cfg = load_config(args.config, args.scenario)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        cfg.out_dir = args.out
    if args.format:
        cfg.out_format = args.format
    record = run_scenario(args.scenario, cfg, args.seed)
    path = emit(record, cfg.out_format, cfg.out_dir)
    for q in record.quantities:
        tol = "" if q.tolerance is None else f" <= {q.tolerance:.1e}"
        mark = "PASS" if q.passed else "FAIL"
        print(f"{mark}  {q.name} = {q.value:.3e}{tol}")
    if record.error:
        print(f"ERROR {record.error}", file=sys.stderr)
    print(f"{'PASS' if record.passed else 'FAIL'} {record.scenario} in {record.wall_time:.2f}s -> {path}")
    return 0 if record.passed else 1


if __name__ == "__main__":
    sys.exit(main())
