"""Command-line entry point: ``cfisac {run,sweep,train,validate,plotdata,config}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import harness, kernels, oracles
from .config import ConfigError, SystemConfig, dumps, load_config, paper_scale, parse_value
from .gnn.checkpoint import load_checkpoint, save_checkpoint
from .gnn.train import train


def _config(args) -> SystemConfig:
    if args.config:
        cfg = load_config(args.config, strict=getattr(args, "strict", False))
    elif getattr(args, "paper_scale", False):
        cfg = paper_scale()
    else:
        cfg = SystemConfig()
    overrides = dict(parse_value(*item.split("=", 1)) for item in getattr(args, "set", None) or [])
    if args.seed is not None:
        overrides["seed"] = args.seed
    return cfg.with_(**overrides) if overrides else cfg


def _methods(args):
    return args.method or list(harness.DEFAULT_METHODS)


def _seeds(cfg, args):
    return list(range(cfg.seed, cfg.seed + args.seeds))


def _checkpoints(items):
    out = {}
    for item in items or []:
        tag, _, path = item.partition("=")
        if tag not in ("robust_gnn", "nonrobust_gnn") or not path:
            raise ConfigError(f"--checkpoint expects robust_gnn=PATH or nonrobust_gnn=PATH, got {item!r}")
        out[tag] = load_checkpoint(path)[0]
    return out


def _emit(result, out):
    if out:
        result.write(out)
    else:
        sys.stdout.write(result.to_csv())


def cmd_run(args):
    cfg = _config(args)
    result = harness.run_experiment(cfg, _methods(args), [{}], _seeds(cfg, args), _checkpoints(args.checkpoint))
    _emit(result, args.out)
    return 0 if all(r["status"] == "ok" for r in result.rows) else 1


def cmd_sweep(args):
    cfg = _config(args)
    grid = {}
    for spec in args.grid:
        name, _, values = spec.partition("=")
        if not values:
            raise ConfigError(f"--grid expects NAME=v1,v2,..., got {spec!r}")
        parsed = [parse_value(name, v) for v in values.split(",")]
        grid[parsed[0][0]] = [v for _, v in parsed]
    result = harness.run_experiment(cfg, _methods(args), grid, _seeds(cfg, args), _checkpoints(args.checkpoint))
    _emit(result, args.out)
    return 0


def cmd_train(args):
    cfg = _config(args)
    robust = cfg.robust if args.robust is None else args.robust
    res = train(cfg, episodes=args.epochs, rng=np.random.default_rng(cfg.seed), n_train=args.samples,
                robust=robust)
    for i, loss in enumerate(res.epoch_losses):
        print(f"epoch {i} loss {loss:.6f}")
    print(f"steps {res.steps} stopped {res.stopped}")
    if args.out:
        save_checkpoint(args.out, res.policy.params,
                        dict(config_hash=cfg.digest(), robust=robust, steps=res.steps, stopped=res.stopped))
    return 0 if res.stopped != "diverged" else 1


def cmd_validate(args):
    print(f"kernel backend: {kernels.BACKEND}")
    return 0 if oracles.run_all(sys.stdout) else 1


def cmd_plotdata(args):
    rows = harness.read_csv(args.input)
    data = harness.plot_data(rows, args.x, args.y)
    fh = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=["method", args.x, "mean", "n"], lineterminator="\r\n")
        writer.writeheader()
        for row in data:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    finally:
        if args.out:
            fh.close()
    return 0


def cmd_config(args):
    text = dumps(_config(args))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfisac", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, methods=False):
        p.add_argument("--config", help="INI configuration file (defaults when omitted)")
        p.add_argument("--strict", action="store_true", help="require every field in --config")
        p.add_argument("--paper-scale", action="store_true", help="use the larger preset instead of defaults")
        p.add_argument("--set", action="append", metavar="NAME=VALUE", help="override a config field")
        p.add_argument("--seed", type=int, help="base seed (overrides the config)")
        p.add_argument("--out", help="output path (stdout when omitted)")
        if methods:
            p.add_argument("--method", action="append", choices=harness.METHODS,
                           help="method to evaluate; repeatable (default: all four)")
            p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
            p.add_argument("--checkpoint", action="append", metavar="TAG=PATH",
                           help="use a saved policy instead of training")
        return p

    common(sub.add_parser("run", help="evaluate methods on the base configuration"), True).set_defaults(fn=cmd_run)
    p = common(sub.add_parser("sweep", help="evaluate methods over a parameter grid"), True)
    p.add_argument("--grid", action="append", required=True, metavar="NAME=v1,v2,...")
    p.set_defaults(fn=cmd_sweep)
    p = common(sub.add_parser("train", help="train a graph policy and save a checkpoint"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--samples", type=int, default=16, help="training channel draws")
    p.add_argument("--robust", dest="robust", action="store_true", default=None)
    p.add_argument("--nonrobust", dest="robust", action="store_false")
    p.set_defaults(fn=cmd_train)
    p = common(sub.add_parser("validate", help="run every numerical oracle"))
    p.set_defaults(fn=cmd_validate)
    p = common(sub.add_parser("plotdata", help="aggregate a results CSV into figure series"))
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--x", default="epsilon")
    p.add_argument("--y", default="adversarial_rate")
    p.set_defaults(fn=cmd_plotdata)
    common(sub.add_parser("config", help="print the effective configuration")).set_defaults(fn=cmd_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, OSError, ValueError) as exc:
        kind = "" if type(exc) in (ConfigError, ValueError) else f"{type(exc).__name__}: "
        print(f"cfisac: error: {kind}{exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
