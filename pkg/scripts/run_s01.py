"""Desk-scale S01 experiment with default settings; prints the summary table.

    python3 scripts/run_s01.py --out runs/s01 [--seed 0] [--epochs 40]
"""

import argparse
import json
import logging
from dataclasses import replace

from rdtlgn.experiment import ExperimentConfig, run_experiment, write_artifacts


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/s01")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, help="override training epochs")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    cfg = replace(ExperimentConfig(), seed=args.seed)
    if args.epochs:
        cfg = replace(cfg, train=replace(cfg.train, epochs=args.epochs))
    result = run_experiment(cfg)
    write_artifacts(result, args.out)
    print(open(f"{args.out}/summary.txt").read())
    print(json.dumps({k: round(v, 1) for k, v in result.timings.items()}))


if __name__ == "__main__":
    main()
