"""Command-line entry point: ``dim3 {run,resume,gen,eval}``.

Exit codes: 0 success, 2 bad config or arguments, 3 unreadable data,
4 numerical failure inside a sampler.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import runner
from .runner import MODEL_CHOICES, ConfigError, DataError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("dim3")


def _config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", help="INI config file; flags below override it")
    p.add_argument("--model", choices=MODEL_CHOICES)
    p.add_argument("--dataset", help="dataset file (text format)")
    p.add_argument("--case", type=int, choices=(1, 2, 3, 4), help="fixed ground-truth case")
    p.add_argument("--generator", choices=("fixed", "mtv", "mti", "sampson"))
    p.add_argument("-n", "--n", type=int, dest="n", help="nodes for generated data")
    p.add_argument("-T", "--T", type=int, dest="T", help="time steps for generated data")
    p.add_argument("--data-seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=float, help="fraction of iterations discarded")
    p.add_argument("--thin", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--workers", type=int, help="parallel chains (default: one per chain)")
    p.add_argument("--K-init", type=int, dest="K_init")
    p.add_argument("--K-fixed", type=int, dest="K_fixed")
    p.add_argument("--random-order", action="store_const", const=True)
    for name in ("gamma", "alpha", "kappa", "lambda1", "lambda2"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--freeze", help="comma-separated subset of gamma,alpha,kappa")


OVERRIDES = ("model", "dataset", "case", "generator", "n", "T", "data_seed", "iterations",
             "burn_in", "thin", "chains", "seed", "output", "checkpoint_every", "workers",
             "K_init", "K_fixed", "random_order", "gamma", "alpha", "kappa", "lambda1",
             "lambda2", "freeze")


def _config(args) -> runner.RunConfig:
    over = {k: getattr(args, k, None) for k in OVERRIDES}
    return runner.load_config(args.config, over)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dim3", description="Dynamic mixed-membership blockmodels")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="sample one or more chains")
    _config_flags(p)

    p = sub.add_parser("resume", help="continue a run from its checkpoints")
    p.add_argument("run_dir")
    p.add_argument("-c", "--config", help="must match the original run")

    p = sub.add_parser("gen", help="write a synthetic dataset")
    _config_flags(p)
    p.add_argument("dest", help="dataset file to write")

    p = sub.add_parser("eval", help="diagnostics and recovery from trace files")
    p.add_argument("traces", nargs="+")
    p.add_argument("--truth", help="dataset file with a ground-truth section")
    p.add_argument("--burn-in", type=float, default=0.5)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    return ap


def _dispatch(args) -> dict | None:
    if args.command == "run":
        return runner.run(_config(args))
    if args.command == "resume":
        cfg = runner.load_config(args.config) if args.config else None
        return runner.resume(args.run_dir, cfg)
    if args.command == "gen":
        bundle = runner.gen(_config(args), args.dest)
        log.info("wrote %s (n=%d, T=%d)", args.dest, bundle.data.n, bundle.data.T)
        return None
    if not 0 <= args.burn_in < 1 or args.thin < 1:
        raise ConfigError("--burn-in must lie in [0, 1) and --thin must be >= 1")
    rep = runner.evaluate(args.traces, args.truth, args.burn_in, args.thin)
    text = json.dumps(rep, indent=1, sort_keys=True)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return None


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except ConfigError as err:
        print(f"dim3: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as err:
        print(f"dim3: {err}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, ArithmeticError, RuntimeError) as err:
        print(f"dim3: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
