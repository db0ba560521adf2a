#!/usr/bin/env python3
"""Run every Monte Carlo preset and write one results CSV per preset.

Usage:
    python3 scripts/run_all_presets.py --out-dir results [--trials 200]

With default trial counts this reproduces the benchmark sweeps end to end;
pass a smaller ``--trials`` for a quick smoke run.
"""
import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from irs_sensing.config import load_config
from irs_sensing.experiments import (PRESET_NAMES, build_spec, emit_results,
                                     run_experiment)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/default.yaml")
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--trials", type=int, default=None,
                        help="override every preset's trial count")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--presets", nargs="*", default=None,
                        help=f"subset of: {', '.join(PRESET_NAMES)}")
    args = parser.parse_args()

    config = load_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    names = args.presets if args.presets else PRESET_NAMES
    for name in names:
        spec = build_spec(name, trials=args.trials, seed=args.seed)
        start = time.perf_counter()
        rows = run_experiment(spec, config)
        elapsed = time.perf_counter() - start
        path = out_dir / f"{name}.csv"
        emit_results(rows, path)
        print(f"{name:<22} {len(rows):>3} rows  {elapsed:7.1f} s  -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
