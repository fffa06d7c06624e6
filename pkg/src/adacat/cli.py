"""``adacat`` command line: train, eval, sample, grid and verify.

Results go to standard output as JSON or CSV; logs go to standard error.
Exit codes: 0 success, 1 verification failure, 2 bad input, 3 aborted training.
"""

import argparse
import csv
import datetime
import json
import logging
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .armodel import HEAD_MODES, ArDensityModel, ar_sample, joint_log_likelihood
from .datasets import Dataset, DatasetError, load_csv, marginal_quantiles, synth_mixture_1d, synth_two_spirals
from .distribution import SAMPLE_MODES
from .experiments import FIXTURES
from .smoothing import KERNEL_KINDS, SmoothingKernel
from .training import TrainConfig, evaluate, train, training_split
from .verify import run_all

logger = logging.getLogger("adacat")

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE, EXIT_ABORTED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _hidden(text):
    try:
        sizes = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated widths, got {text!r}")
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("hidden widths must be positive")
    return sizes


def build_parser():
    parser = _Parser(prog="adacat", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model and write checkpoint, report and manifest")
    p.add_argument("--data", default="synth:mixture1d",
                   help="synth:mixture1d, synth:twospirals, csv:PATH or json:PATH")
    p.add_argument("--header", action="store_true", help="CSV has a header row")
    p.add_argument("--dims", type=_positive_int, help="expected CSV column count")
    p.add_argument("--n", type=_positive_int, help="synthetic sample count")
    p.add_argument("--noise", type=float, help="two-spirals noise standard deviation")
    p.add_argument("--mode", choices=HEAD_MODES, default="adacat")
    p.add_argument("--bins", type=_positive_int, help="bins per conditional (k)")
    p.add_argument("--hidden", type=_hidden, help="hidden widths, e.g. 64,64")
    p.add_argument("--fourier", type=_non_negative_int, help="Fourier feature pairs (b)")
    p.add_argument("--smoothing", choices=("none",) + KERNEL_KINDS, default="uniform")
    p.add_argument("--lambda", dest="bandwidth", type=_positive_float, default=1e-3, help="kernel width")
    p.add_argument("--epochs", type=_non_negative_int)
    p.add_argument("--batch-size", type=_positive_int)
    p.add_argument("--lr", type=_positive_float)
    p.add_argument("--lr-halving", type=_non_negative_int, help="halve the rate every N epochs (0: never)")
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--val-fraction", type=float, help="share of the data held out for validation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="run", help="output directory")
    p.add_argument("--from-manifest", help="repeat the run recorded in a manifest.json")

    p = sub.add_parser("eval", help="print NLL of a dataset under a checkpoint as JSON")
    p.add_argument("checkpoint")
    p.add_argument("data", help="data spec as for train")
    p.add_argument("--header", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="seed for synthetic data")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--noise", type=float)

    p = sub.add_parser("sample", help="print samples as CSV in original units")
    p.add_argument("checkpoint")
    p.add_argument("--n", type=_non_negative_int, default=1000)
    p.add_argument("--mode", choices=SAMPLE_MODES, default="uniform")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("grid", help="print model density on a regular grid as CSV (scaled units)")
    p.add_argument("checkpoint")
    p.add_argument("--resolution", type=_positive_int, default=100)

    p = sub.add_parser("verify", help="run the analytic-vs-oracle verification suite")
    p.add_argument("--quick", action="store_true", help="fewer random cases")
    return parser


# ----------------------------------------------------------------------
# data


def load_data(spec, seed=0, n=None, noise=None, header=False, dims=None):
    kind, _, arg = spec.partition(":")
    if kind == "synth":
        kwargs = {"seed": seed}
        if n is not None:
            kwargs["n"] = n
        if arg == "mixture1d":
            return synth_mixture_1d(**kwargs)
        if arg == "twospirals":
            if noise is not None:
                kwargs["noise_sd"] = noise
            return synth_two_spirals(**kwargs)
        raise UsageError(f"unknown synthetic dataset {arg!r}")
    if kind == "csv" and arg:
        return load_csv(arg, declared_dims=dims, header=header)
    if kind == "json" and arg:
        return Dataset.load_json(arg)
    raise UsageError(f"cannot parse data spec {spec!r}")


def _git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=10)
        return out.stdout.strip() or None
    except (OSError, subprocess.SubprocessError):
        return None


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


# ----------------------------------------------------------------------
# commands


_TRAIN_KEYS = ("data", "header", "dims", "n", "noise", "mode", "bins", "hidden", "fourier", "smoothing",
               "bandwidth", "epochs", "batch_size", "lr", "lr_halving", "weight_decay", "val_fraction", "seed")


def _resolve_train_args(args):
    """Fill unset model/optimizer flags from the matching canonical fixture."""
    if args.from_manifest:
        with open(args.from_manifest) as fh:
            recorded = json.load(fh)["config"]
        for key in _TRAIN_KEYS:
            value = recorded.get(key)
            setattr(args, key, tuple(value) if key == "hidden" and value is not None else value)
    kind, _, name = args.data.partition(":")
    fixture = FIXTURES.get(name) if kind == "synth" else None
    defaults = {"bins": 16, "hidden": (64, 64), "fourier": 0, "epochs": 100, "batch_size": 256, "lr": 3e-4,
                "lr_halving": 0, "val_fraction": 0.1}
    if fixture is not None:
        defaults = {"bins": fixture.bins, "hidden": fixture.hidden, "fourier": fixture.fourier,
                    "epochs": fixture.epochs, "batch_size": fixture.batch_size, "lr": fixture.lr,
                    "lr_halving": fixture.lr_halving_period, "val_fraction": fixture.val_fraction}
        if args.n is None:
            args.n = fixture.n
    for key, value in defaults.items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    return args


def cmd_train(args):
    args = _resolve_train_args(args)
    data = load_data(args.data, args.seed, args.n, args.noise, args.header, args.dims)
    kernel = None if args.smoothing == "none" else SmoothingKernel(args.smoothing, args.bandwidth)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                         lr_halving_period=args.lr_halving, weight_decay=args.weight_decay,
                         smoothing=kernel, seed=args.seed, val_fraction=args.val_fraction)
    fixed_w = None
    if args.mode == "fixed-quantile":
        fixed_w = marginal_quantiles(data, args.bins, samples=training_split(data, config)[0])
    model = ArDensityModel(data.m, args.bins, args.mode, args.hidden, args.fourier, seed=args.seed,
                           fixed_w=fixed_w)
    model.scale_meta = data.scale_meta

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: str(out / name) for name in ("checkpoint.json", "report.jsonl", "manifest.json")}
    manifest = {
        "command": "train",
        "argv": sys.argv[1:],
        "config": {key: getattr(args, key) for key in _TRAIN_KEYS},
        "train_config": config.to_dict(),
        "seed": args.seed,
        "git_describe": _git_describe(),
        "start": _now(),
        "end": None,
        "outputs": paths,
    }
    _write_json(paths["manifest.json"], manifest)
    logger.info("training %s on %s (n=%d, m=%d)", args.mode, data.name, data.n, data.m)

    report = train(model, data, config)
    report.checkpoint_path = paths["checkpoint.json"]
    report.write_jsonl(paths["report.jsonl"])
    model.save(paths["checkpoint.json"])
    manifest["end"] = _now()
    manifest["aborted"] = report.aborted
    _write_json(paths["manifest.json"], manifest)
    final = report.final
    print(json.dumps({"epochs": final.epoch, "val_nll_nats": final.val_nll_nats,
                      "val_bits_per_dim": final.val_bits_per_dim, "aborted": report.aborted,
                      "abort_reason": report.abort_reason, "checkpoint": paths["checkpoint.json"]}))
    if report.aborted:
        logger.error("training aborted: %s", report.abort_reason)
        return EXIT_ABORTED
    return EXIT_OK


def _load_checkpoint(path):
    try:
        return ArDensityModel.load(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load checkpoint {path}: {exc}")


def cmd_eval(args):
    model = _load_checkpoint(args.checkpoint)
    data = load_data(args.data, args.seed, args.n, args.noise, args.header)
    if data.m != model.m:
        raise UsageError(f"data has {data.m} dimensions but the checkpoint models {model.m}")
    res = evaluate(model, data)
    doc = {"n": data.n, "nll_nats": res.nll_nats, "nll_scaled_nats": res.nll_scaled_nats,
           "bits_per_dim": res.bits_per_dim}
    if data.true_nll is not None:
        doc["true_nll_scaled_nats"] = data.true_nll
    if res.worst_index is not None:
        doc["worst_index"] = res.worst_index
    print(json.dumps(doc))
    return EXIT_OK


def cmd_sample(args):
    model = _load_checkpoint(args.checkpoint)
    Z = ar_sample(model, args.n, args.seed, args.mode)
    X = Z if model.scale_meta is None else model.scale_meta[:, 0] + model.scale_meta[:, 1] * Z
    writer = csv.writer(sys.stdout, lineterminator="\n")
    for row in X:
        writer.writerow([repr(float(v)) for v in row])
    return EXIT_OK


def density_grid(model, resolution):
    """Cell-centre grid and the model density (scaled units) at each point."""
    if model.m > 2:
        raise UsageError(f"grid export supports 1-D and 2-D models, this checkpoint has m={model.m}")
    centres = (np.arange(resolution) + 0.5) / resolution
    if model.m == 1:
        pts = centres[:, None]
    else:
        g1, g2 = np.meshgrid(centres, centres, indexing="ij")
        pts = np.stack([g1.ravel(), g2.ravel()], axis=1)
    return pts, np.exp(joint_log_likelihood(model, pts))


def cmd_grid(args):
    model = _load_checkpoint(args.checkpoint)
    pts, dens = density_grid(model, args.resolution)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["x", "density"] if model.m == 1 else ["x1", "x2", "density"])
    for p, d in zip(pts, dens):
        writer.writerow([repr(float(v)) for v in p] + [repr(float(d))])
    return EXIT_OK


def cmd_verify(args):
    results = run_all(quick=args.quick)
    width = max(len(r.name) for r in results)
    print(f"{'check':<{width}}  status  {'error':>10}  {'tolerance':>9}")
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.error:>10.3e}  {r.tolerance:>9.1e}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "sample": cmd_sample, "grid": cmd_grid, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"adacat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get("ADACAT_THREADS")
    try:
        limit = int(threads) if threads else None
    except ValueError:
        print(f"adacat: error: ADACAT_THREADS must be an integer, got {threads!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        with threadpool_limits(limits=limit):
            return COMMANDS[args.command](args)
    except (UsageError, DatasetError, ValueError) as exc:
        print(f"adacat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
