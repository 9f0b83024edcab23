#!/usr/bin/env python3
"""Run every bundled experiment config and write its CSV under results/.

Usage:
    python scripts/run_experiments.py [--only geo_bias,sandwich] [--trials N]

Full runs take a few minutes (the geo-bias table alone is 6 city pairs x
5 policies x 10^4 trials); pass --trials to downscale for a quick look.
"""

import argparse
import sys
import time
from dataclasses import replace
from importlib import resources

from fairorder.harness import emit_csv, parse_config, run_experiment

CONFIGS = ("bounds_table", "geo_bias", "tradeoff_curve", "sandwich", "liquidation")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--only", help="comma-separated subset of configs to run")
    parser.add_argument("--trials", type=int, help="override trial count for a quick pass")
    args = parser.parse_args(argv)
    wanted = set(args.only.split(",")) if args.only else set(CONFIGS)

    config_dir = resources.files("fairorder.data") / "configs"
    for name in CONFIGS:
        if name not in wanted:
            continue
        with resources.as_file(config_dir / f"{name}.cfg") as path:
            config = parse_config(path)
        if args.trials:
            config = replace(config, trials=args.trials)
        t0 = time.time()
        result = run_experiment(config)
        emit_csv(result, config.output)
        print(f"{name:15s} -> {config.output}  ({time.time() - t0:.1f}s, {len(result.rows)} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
