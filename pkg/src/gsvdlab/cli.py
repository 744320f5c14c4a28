"""Command line entry point: ``gsvdlab <subcommand> --config PATH [--seed N] [--out DIR]``."""
import argparse
import json
import os
import sys

from . import jsonio
from .config import RunConfig, load_config
from .errors import GsvdError
from .pipeline import Run

SUBCOMMANDS = ("train-svdnet", "build-gsvd", "validate", "attack", "bias-sweep", "traverse")


def _parser():
    p = argparse.ArgumentParser(prog="gsvdlab", description="GSVD construction, SVDNet training and analysis")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON run config (defaults apply when omitted)")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--out", help="override output directory")
    p.add_argument("--on", choices=("holdout", "construct"), default="holdout",
                   help="validate: which split to evaluate")
    return p


def run(subcommand, cfg, on="holdout"):
    r = Run(cfg)
    if subcommand == "train-svdnet":
        _, result = r.train_svdnet()
    elif subcommand == "build-gsvd":
        model, _ = r.build_gsvd()
        result = model.to_dict()
    elif subcommand == "validate":
        result = r.validate(on).to_dict()
    elif subcommand == "attack":
        _, result = r.attack()
    elif subcommand == "bias-sweep":
        result = [b.to_dict() for b in r.bias_sweep()]
    else:
        result = r.traverse()
    r.stamp(subcommand)
    return result


def main(argv=None):
    args = _parser().parse_args(argv)
    out_dir = args.out
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        out_dir = cfg.out
        result = run(args.subcommand, cfg, args.on)
    except GsvdError as e:
        err = e.to_dict()
        err["subcommand"] = args.subcommand
        sys.stdout.write(json.dumps(err) + "\n")
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            jsonio.dump(err, os.path.join(out_dir, "error.json"))
        return 2 if err["error"] == "config_error" else 1
    sys.stdout.write(jsonio.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
