"""Run every stage for one config and print a short summary.

    python scripts/run_pipeline.py configs/blobs.json [--seed N] [--out DIR]
"""
import argparse
import sys

from gsvdlab import jsonio
from gsvdlab.cli import SUBCOMMANDS, run
from gsvdlab.config import load_config


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--skip", nargs="*", default=[], choices=SUBCOMMANDS)
    args = p.parse_args(argv)
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out

    results = {}
    for stage in SUBCOMMANDS:
        if stage in args.skip:
            continue
        print(f"== {stage}", file=sys.stderr)
        results[stage] = run(stage, cfg)

    summary = {}
    if "train-svdnet" in results:
        m = results["train-svdnet"]
        summary["holdout_accuracy"] = m["holdout_accuracy"]
        summary["head_sigma"] = m["head_sigma"]
    if "validate" in results:
        summary["validation"] = results["validate"]
    if "attack" in results:
        summary["attack"] = results["attack"]
    if "bias-sweep" in results:
        summary["sigma_ratio_series"] = {b["sample_ratio"]: b["sigma_ratio"] for b in results["bias-sweep"]}
    sys.stdout.write(jsonio.dumps(summary))


if __name__ == "__main__":
    main()
