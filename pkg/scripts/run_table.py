"""All six benchmark specifications end to end, one row each (Table-I layout).

    python3 scripts/run_table.py --out runs/table [--specs S01 S03] [--seed 0]

Each spec takes a few minutes on one core; artifacts go to <out>/<spec>/.
"""

import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path

from rdtlgn.experiment import ExperimentConfig, format_table, run_experiment, write_artifacts
from rdtlgn.specs import SPECS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/table")
    ap.add_argument("--specs", nargs="+", default=sorted(SPECS))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    out = Path(args.out)
    rows = []
    for name in args.specs:
        cfg = replace(ExperimentConfig.from_dict({"spec": name}), seed=args.seed)
        result = run_experiment(cfg)
        write_artifacts(result, out / name)
        rows.append(result.summary())
        print(format_table(rows), flush=True)

    out.mkdir(parents=True, exist_ok=True)
    (out / "table.txt").write_text(format_table(rows))
    (out / "table.json").write_text(json.dumps(rows, indent=1))
    print(format_table(rows))


if __name__ == "__main__":
    main()
