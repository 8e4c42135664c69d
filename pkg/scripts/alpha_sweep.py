#!/usr/bin/env python3
"""Sweep the ensemble weight over a synthetic universe and print R5/tau.

Usage: python scripts/alpha_sweep.py [--seed 1] [--alphas 0,0.25,0.5,0.75,1]
"""

import argparse

from swab.bench import run_lodo_benchmark
from swab.config import RunConfig
from swab.synth import SynthConfig, generate_synthetic_universe


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--alphas", type=str, default="0,0.25,0.5,0.75,1")
    ap.add_argument("--noise-seeds", type=str, default="1,2,3")
    args = ap.parse_args()

    universe = generate_synthetic_universe(SynthConfig(), args.seed)
    seeds = tuple(int(s) for s in args.noise_seeds.split(","))
    print(f"universe seed={args.seed}  noise seeds={seeds}")
    print(f"{'alpha':>6} {'R5':>7} {'tau':>7} {'R5+tau':>8}")
    for alpha in (float(a) for a in args.alphas.split(",")):
        config = RunConfig(alpha=alpha, seeds=seeds)
        report = run_lodo_benchmark(universe.bundles, universe.zoo, config)
        o = report.payload["overall"]["swab"]
        print(f"{alpha:6.2f} {o['R5']['mean']:7.3f} {o['tau']['mean']:7.3f} "
              f"{o['r5_plus_tau']['mean']:8.3f}")


if __name__ == "__main__":
    main()
