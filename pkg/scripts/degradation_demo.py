"""Verdict degradation of a hardened circuit under progressive predicate dropout.

    python3 scripts/degradation_demo.py runs/s01/QtC/circuit.json [--config cfg.json]

Prints the abstention curve and, for one test trajectory, the verdict trace
with 0..P predicates masked.
"""

import argparse

from rdtlgn.circuit import InputMask, circuit_from_json, run
from rdtlgn.experiment import ExperimentConfig, load_config, prepare_data
from rdtlgn.metrics import abstention_profile, lattice_compliance, preservation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("circuit")
    ap.add_argument("--config")
    ap.add_argument("--traj", type=int, default=0, help="test trajectory to trace")
    args = ap.parse_args()

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    c = circuit_from_json(open(args.circuit).read())
    data = prepare_data(cfg)
    q = data.trits[data.test_idx]
    print(f"preservation {preservation(c, q):.3f}, lattice {lattice_compliance(c, q):.3f}")
    for k, v in abstention_profile(c, q).items():
        print(f"  {k} masked: {100 * v:5.1f}% abstain")
    x = q[args.traj]
    sym = {1: "+", 0: ".", -1: "-"}
    print("label  ", "".join(sym[int(v)] for v in data.labels["CtQ"][data.test_idx][args.traj]))
    for k in range(cfg.P + 1):
        v = run(c, x, InputMask(range(k)))[0]
        print(f"mask {k}", "".join(sym[int(t)] for t in v))


if __name__ == "__main__":
    main()
