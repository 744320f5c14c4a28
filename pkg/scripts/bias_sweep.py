"""Head spectrum vs. class-sampling ratio, averaged over several seeds.

    python scripts/bias_sweep.py --seeds 0 1 2 --ratios 1 0.3 0.1 0.03
"""
import argparse

import numpy as np

from gsvdlab.analysis import bias_sweep
from gsvdlab.data import synth_blobs
from gsvdlab.svdnet import NetConfig, TrainConfig


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--ratios", type=float, nargs="+", default=[1.0, 0.3, 0.1, 0.03])
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--target", type=int, default=0)
    args = p.parse_args(argv)

    rows = []
    for seed in args.seeds:
        data = synth_blobs(args.classes, 1000, args.dim, 10.0, seed=seed)
        tr, hold = data.split(len(data) // 2, seed=seed)
        reps = bias_sweep(tr, hold, args.target, args.ratios, TrainConfig(epochs=args.epochs, seed=seed),
                          NetConfig(hidden=(32,)), seed=seed)
        rows.append([(r.sigma_ratio, r.null_energy_fraction_minority, r.target_dominance) for r in reps])
    rows = np.array(rows)  # seeds x ratios x 3

    print(f"{'ratio':>8} {'s1/s2':>10} {'null_frac':>10} {'dominance':>10}")
    for j, r in enumerate(args.ratios):
        m = rows[:, j].mean(axis=0)
        print(f"{r:>8g} {m[0]:>10.4f} {m[1]:>10.4f} {m[2]:>10.4f}")


if __name__ == "__main__":
    main()
