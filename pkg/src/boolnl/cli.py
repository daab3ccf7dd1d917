"""``bnl`` command-line interface.

Exit codes: 0 success, 1 expected-negative experiment completed,
2 usage or input error, 3 numeric failure (training diverged).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from . import dataset as ds
from . import experiments as ex
from . import neural as nn
from .boolfn import TruthTable, TruthTableError, degree, mobius_transform, weight
from .seeding import derive_seed
from .transform import fwt, nonlinearity

log = logging.getLogger("boolnl")

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

EXPERIMENTS = ("learn-walsh", "min-examples", "affine-min", "end-to-end", "bench")


class UsageError(Exception):
    pass


def _emit(args, record: dict, human: str) -> None:
    if args.json:
        print(json.dumps(record, sort_keys=True))
    else:
        print(human)


# -- props ------------------------------------------------------------------------


def cmd_props(args) -> int:
    if not args.table:
        raise UsageError("props needs a non-empty truth table")
    try:
        f = TruthTable.parse(args.table)
    except TruthTableError as e:
        raise UsageError(str(e)) from None
    deg = degree(f)
    rec = {"n": f.n, "table": f.to_string(), "weight": weight(f), "degree": deg,
           "affine": deg <= 1, "nonlinearity": nonlinearity(f)}
    if args.anf:
        rec["anf"] = str(mobius_transform(f))
    if args.spectrum:
        rec["walsh_spectrum"] = fwt(f).tolist()
    if args.json:
        print(json.dumps(rec, sort_keys=True))
        return EXIT_OK
    lines = [f"n\t{rec['n']}", f"weight\t{rec['weight']}", f"degree\t{deg}",
             f"affine\t{str(rec['affine']).lower()}", f"nonlinearity\t{rec['nonlinearity']}"]
    if args.anf:
        lines.append(f"anf\t{rec['anf']}")
    print("\n".join(lines))
    if args.spectrum:
        sys.stdout.write("".join(f"{w}\t{v}\n" for w, v in enumerate(rec["walsh_spectrum"])))
    return EXIT_OK


# -- gen ----------------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.independent:
        d = ds.independent_set(args.n, args.size, args.seed)
        if args.task != "walsh_spectrum":
            raise UsageError("--independent produces walsh_spectrum targets")
    else:
        try:
            d = ds.generate(args.n, args.task, args.size, args.seed)
        except ds.DatasetError as e:
            raise UsageError(str(e)) from None
    outputs = []
    if args.train_size is not None:
        if not args.test_output:
            raise UsageError("--train-size requires --test-output")
        train, test = ds.split(d, seed=args.seed, train_size=args.train_size)
        ds.save(train, args.output)
        ds.save(test, args.test_output)
        outputs = [(args.output, len(train)), (args.test_output, len(test))]
    else:
        ds.save(d, args.output)
        outputs = [(args.output, len(d))]
    _emit(args, {"command": "gen", "files": [str(p) for p, _ in outputs],
                 "records": [k for _, k in outputs]},
          "; ".join(f"wrote {k} records to {p}" for p, k in outputs))
    return EXIT_OK


# -- train / eval ------------------------------------------------------------------------


def _load_dataset(path) -> ds.Dataset:
    if not Path(path).exists():
        raise FileNotFoundError(path)
    try:
        return ds.load(path)
    except ds.DatasetError as e:
        raise UsageError(f"{path}: {e}") from None


def _load_model(path) -> nn.Network:
    if not Path(path).exists():
        raise FileNotFoundError(path)
    try:
        return nn.load_model(path)
    except nn.ModelFormatError as e:
        raise UsageError(f"{path}: {e}") from None


def _build_network(args, d: ds.Dataset) -> nn.Network:
    size = 1 << d.n
    if args.init_model:
        return _load_model(args.init_model)
    if args.arch == "encoder":
        if args.hidden:
            net = nn.encoder_network(size, [int(w) for w in args.hidden.split(",")])
        else:
            net = ex.encoder_for(d.n)
    elif args.arch == "linear":
        net = nn.linear_network(size, bias=args.bias)
    elif args.arch == "affine-min":
        net = nn.Network(size, ex.affine_min_layers(d.n))
    else:
        raise UsageError(f"unknown architecture {args.arch}")
    nn.init_params(net, args.init, derive_seed(args.seed, "cli-init"))
    if args.arch == "encoder" and d.task == "nonlinearity" and len(d):
        net.params[-1][1][...] = float(d.targets.mean())
    return net


def cmd_train(args) -> int:
    d = _load_dataset(args.data)
    net = _build_network(args, d)
    cfg = nn.TrainConfig(optimizer=args.optimizer, learning_rate=args.lr, batch_size=args.batch,
                         epochs=args.epochs, seed=args.seed, weight_init=args.init,
                         momentum=args.momentum, lr_schedule=args.schedule,
                         weight_decay=args.weight_decay)
    try:
        rep = nn.train_on(net, d, cfg, log=log.info)
    except nn.ShapeError as e:
        raise UsageError(str(e)) from None
    nn.save_model(net, args.output)
    acc = nn.evaluate_accuracy(net, d)
    _emit(args, {"command": "train", "model": str(args.output), "epochs": rep.epochs_run,
                 "final_loss": rep.losses[-1] if rep.losses else None, "train_accuracy": acc},
          f"train accuracy {acc:.4f} after {rep.epochs_run} epochs -> {args.output}")
    return EXIT_OK


def cmd_eval(args) -> int:
    d = _load_dataset(args.data)
    net = _load_model(args.model)
    try:
        acc = nn.evaluate_accuracy(net, d)
    except nn.ShapeError as e:
        raise UsageError(str(e)) from None
    rec = {"command": "eval", "accuracy": acc, "within_0.5": nn.accuracy_within(net, d, 0.5),
           "within_1.0": nn.accuracy_within(net, d, 1.0), "size": len(d)}
    if d.task == "nonlinearity":
        rec["confusion_matrix"] = nn.confusion_matrix(net, d).tolist()
    if args.output:
        rep = ex.ExperimentReport("eval", d.n, d.seed)
        rep.config = {"model": Path(args.model).name, "data": Path(args.data).name}
        rep.metrics = {k: v for k, v in rec.items() if k not in ("command", "confusion_matrix")}
        if "confusion_matrix" in rec:
            cm = rec["confusion_matrix"]
            rep.tables["confusion"] = (["true\\pred"] + [str(c) for c in range(len(cm))],
                                       [(c, *row) for c, row in enumerate(cm)])
        rep.write(args.output)
    human = f"accuracy {acc:.4f} on {len(d)} examples"
    if "confusion_matrix" in rec and not args.json:
        human += "\n" + "\n".join("\t".join(map(str, row)) for row in rec["confusion_matrix"])
    _emit(args, rec, human)
    return EXIT_OK


# -- experiments ---------------------------------------------------------------------------


def _walsh_cfg(args) -> ex.WalshConfig:
    cfg = ex.WalshConfig()
    if args.lr is not None:
        cfg.learning_rate = args.lr
    if args.epochs is not None:
        cfg.max_epochs = args.epochs
    if args.bias:
        cfg.bias = True
    if args.test_size is not None:
        cfg.test_size = args.test_size
    return cfg


def cmd_experiment(args) -> int:
    out = Path(args.out_dir)
    n = args.n
    negative = False
    if args.id == "learn-walsh":
        rep = ex.learn_walsh(n, args.examples, _walsh_cfg(args), seed=args.seed,
                             probe_speedup=args.probe_speedup)
        rep.write(out)
        size = 1 << n
        headline = f"H_{size} recovered: {str(rep.metrics['hadamard_recovered']).lower()}"
    elif args.id == "min-examples":
        rep = ex.min_examples_sweep(n, None, _walsh_cfg(args), seed=args.seed)
        rep.write(out)
        curve = " ".join(f"{k}:{a:.3f}" for k, a, *_ in rep.tables["curve"][1])
        headline = f"accuracy by k {curve}"
    elif args.id == "affine-min":
        size = 1 << n
        total = min(args.train_size or 2000, (1 << size) - 1) + (args.test_size or 1000)
        total = min(total, 1 << size)
        full = ds.generate(n, "nonlinearity", total, derive_seed(args.seed, "affine-min-data"))
        train_n = min(args.train_size or 2000, total - 1)
        train, test = ds.split(full, seed=args.seed, train_size=train_n)
        cfg = nn.TrainConfig(optimizer=args.optimizer or "adam", learning_rate=args.lr or 1e-2,
                             batch_size=args.batch or 32, epochs=args.epochs or 50, seed=args.seed)
        rep = ex.affine_min_training_attempt(n, train, test, cfg, warm_start=args.warm_start)
        rep.write(out)
        nn.save_model(rep.network, out / f"{rep.stem}.bnlm")
        headline = f"affine+min test accuracy {rep.metrics['test_accuracy']:.4f}"
        negative = not args.warm_start
    elif args.id == "end-to-end":
        cfg = ex.EndToEndConfig(train_size=args.train_size, test_size=args.test_size,
                                epochs=args.epochs)
        if args.optimizer:
            cfg.optimizer = args.optimizer
        if args.lr:
            cfg.learning_rate = args.lr
        if args.batch:
            cfg.batch_size = args.batch
        rep = ex.end_to_end(n, cfg, seed=args.seed, log=log.info)
        rep.write(out)
        nn.save_model(rep.network, out / f"{rep.stem}.bnlm")
        headline = (f"end-to-end n={n} test accuracy {rep.metrics['test_accuracy']:.4f} "
                    f"({rep.metrics['parameter_count']} parameters)")
        negative = rep.expected_negative
    else:
        return cmd_bench(args)
    _emit(args, {"command": "experiment", "id": args.id, "report": str(out / f"{rep.stem}.report"),
                 "metrics": {k: v for k, v in rep.metrics.items() if not isinstance(v, np.ndarray)}},
          f"{headline} -> {out / (rep.stem + '.report')}")
    return EXIT_NEGATIVE if negative else EXIT_OK


def cmd_bench(args) -> int:
    model = None
    if args.model:
        model = _load_model(args.model)
    elif args.n in ex.ENCODER_HIDDEN and not args.no_model:
        raise FileNotFoundError("bench needs --model (or --no-model to time the transforms only)")
    rep, timings = ex.cost_benchmark(args.n, model, seed=args.seed)
    out = Path(args.out_dir)
    rep.write(out)
    tpath = ex.write_timings(out, args.n, args.seed, timings)
    summary = ex.timing_summary(args.n, timings)
    _emit(args, {"command": "bench", "report": str(out / f"{rep.stem}.report"),
                 "timings": str(tpath), **summary},
          f"fwt faster than naive: {str(summary['fwt_faster_than_naive_single']).lower()}"
          + (f"; network/fwt time ratio {summary['network_over_fwt_ratio']:.1f}"
             if "network_over_fwt_ratio" in summary else "")
          + f" -> {out / (rep.stem + '.report')}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bnl", description="Boolean-function nonlinearity toolkit")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--json", action="store_true", help="JSON-lines output")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("props", help="properties of one truth table")
    sp.add_argument("table", help="0/1 string, or hex (0x-prefixed or containing a-f)")
    sp.add_argument("--spectrum", action="store_true", help="also print the Walsh spectrum")
    sp.add_argument("--anf", action="store_true", help="also print the algebraic normal form")
    sp.set_defaults(func=cmd_props)

    sp = sub.add_parser("gen", help="generate a dataset file")
    sp.add_argument("-n", type=int, required=True)
    sp.add_argument("--task", choices=ds.TASKS, default="nonlinearity")
    sp.add_argument("--size", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--independent", action="store_true",
                    help="draw linearly independent functions (walsh_spectrum task)")
    sp.add_argument("--train-size", type=int)
    sp.add_argument("--test-output")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("train", help="train a network on a dataset file")
    sp.add_argument("--data", required=True)
    sp.add_argument("--arch", choices=("encoder", "linear", "affine-min"), default="encoder")
    sp.add_argument("--hidden", help="comma-separated hidden widths for --arch encoder")
    sp.add_argument("--bias", action="store_true", help="linear arch: include a bias vector")
    sp.add_argument("--init-model", help="start from this model file instead of a fresh init")
    sp.add_argument("--init", choices=nn.INIT_SCHEMES, default="uniform_scaled")
    sp.add_argument("--optimizer", choices=("sgd", "adam"), default="adam")
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--momentum", type=float, default=0.0)
    sp.add_argument("--schedule", choices=("constant", "cosine"), default="constant")
    sp.add_argument("--weight-decay", type=float, default=0.0)
    sp.add_argument("--batch", type=int, default=32)
    sp.add_argument("--epochs", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="accuracy and confusion matrix of a model on a dataset")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("-o", "--output", help="directory for a report")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("experiment", help="run one of the reproduction experiments")
    sp.add_argument("id", choices=EXPERIMENTS)
    sp.add_argument("-n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default="reports")
    sp.add_argument("--examples", type=int, help="learn-walsh: number of training functions")
    sp.add_argument("--probe-speedup", action="store_true", help="learn-walsh: also train at 4N")
    sp.add_argument("--bias", action="store_true", help="learn-walsh: give the linear layer a bias")
    sp.add_argument("--warm-start", action="store_true", help="affine-min: start at the analytic weights")
    sp.add_argument("--optimizer", choices=("sgd", "adam"))
    sp.add_argument("--lr", type=float)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--train-size", type=int)
    sp.add_argument("--test-size", type=int)
    sp.add_argument("--model", help="bench: trained model file")
    sp.add_argument("--no-model", action="store_true", help="bench: time transforms only")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("bench", help="time fwt, naive and network nonlinearity")
    sp.add_argument("-n", type=int, required=True)
    sp.add_argument("--model")
    sp.add_argument("--no-model", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default="reports")
    sp.set_defaults(func=cmd_bench)
    return p


def _apply_thread_cap() -> None:
    cap = os.environ.get("BNL_THREADS")
    if not cap or not _kernels.USE_NUMBA:
        return
    import numba

    numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(message)s", stream=sys.stderr)
    _apply_thread_cap()
    try:
        return args.func(args)
    except UsageError as e:
        print(f"bnl: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"bnl: error: file not found: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (nn.ShapeError, ds.DatasetError, TruthTableError, ValueError) as e:
        print(f"bnl: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except nn.TrainingDiverged as e:
        print(f"bnl: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
