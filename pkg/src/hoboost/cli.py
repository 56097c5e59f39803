"""Command-line entry point: ``hoboost {train,predict,eval,benchmark}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import model_store
from .benchmark import (
    DEFAULT_ETA_GRID,
    DEFAULT_LAMBDA_GRID,
    REPORT_COLUMNS,
    format_report,
    report_rows,
    run_benchmark,
)
from .booster import BoostConfig, evaluate, fit, predict
from .data import DataError, load_csv, make_synthetic, split_dataset
from .leaf_solver import DegenerateDenominatorError
from .logs import write_convergence_csv
from .losses import LossKind, sigmoid
from .model_store import ModelFormatError

logger = logging.getLogger("hoboost")

CUBIC_MODE_FLAGS = {"halley": "halley", "exact": "exact_root", "series": "series"}
FORMULA_FLAGS = {"classical": "classical", "paper": "paper_literal"}


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _order_list(text: str) -> list[int]:
    try:
        orders = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated orders, got {text!r}")
    if not orders or any(o not in (2, 3, 4) for o in orders):
        raise argparse.ArgumentTypeError("orders must be drawn from 2, 3, 4")
    return orders


def _synthetic_shape(text: str) -> tuple[int, int]:
    try:
        n, m = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("--synthetic expects N_ROWS,N_FEATURES")
    if n < 2 or m < 1:
        raise argparse.ArgumentTypeError("--synthetic needs at least 2 rows and 1 feature")
    return n, m


def _label(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


def _add_data_flags(p, test: bool = False):
    g = p.add_argument_group("data")
    g.add_argument("--train", type=Path, help="training CSV")
    g.add_argument("--valid", type=Path, help="validation CSV")
    if test:
        g.add_argument("--test", type=Path, help="test CSV")
    g.add_argument("--synthetic", type=_synthetic_shape, metavar="N,M",
                   help="generate N rows x M features instead of reading CSVs (60/20/20 split)")
    _add_csv_flags(g)


def _add_csv_flags(g):
    g.add_argument("--label", type=_label, default=-1,
                   help="label column: header name or 0-based index (default: last column)")
    g.add_argument("--no-header", action="store_true", help="CSV files have no header row")
    g.add_argument("--max-rows", type=int, default=None,
                   help="read at most this many rows from each CSV (downsampling)")


def _add_training_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--loss", choices=[k.value for k in LossKind], default="logloss")
    g.add_argument("--order", type=int, choices=(2, 3, 4), default=2)
    g.add_argument("--cubic-mode", choices=sorted(CUBIC_MODE_FLAGS), default="halley")
    g.add_argument("--fourth-order-formula", choices=sorted(FORMULA_FLAGS), default="classical")
    g.add_argument("--lambda", dest="lam", type=float, default=1.0, help="L2 leaf regularizer")
    g.add_argument("--eta", type=float, default=0.1, help="learning rate")
    g.add_argument("--rounds", type=int, default=1000)
    g.add_argument("--max-depth", type=int, default=6)
    g.add_argument("--min-child-rows", type=int, default=1)
    g.add_argument("--min-gain", type=float, default=0.0)
    g.add_argument("--trust-alpha", type=float, default=1.0)
    g.add_argument("--early-stop", type=int, default=None, metavar="ROUNDS")
    g.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hoboost", description="Gradient-boosted trees with order 2-4 leaf updates."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write it to --model")
    _add_data_flags(p)
    _add_training_flags(p)
    p.add_argument("--model", type=Path, required=True, help="output model file")
    p.add_argument("--log", type=Path, help="convergence CSV, one line per round")

    p = sub.add_parser("predict", help="score a feature CSV")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="feature CSV")
    p.add_argument("--label", type=_label, default=None,
                   help="column to drop before scoring (omit if the file has no label)")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--max-rows", type=int, default=None)
    p.add_argument("--output", type=Path, help="output CSV (default: stdout)")

    p = sub.add_parser("eval", help="loss and accuracy on a labeled CSV")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    _add_csv_flags(p)

    p = sub.add_parser("benchmark", help="time-to-99%%-accuracy comparison between orders")
    _add_data_flags(p, test=True)
    _add_training_flags(p)
    p.add_argument("--orders", type=_order_list, default=[2, 3, 4])
    p.add_argument("--lambda-grid", type=_float_list, default=list(DEFAULT_LAMBDA_GRID))
    p.add_argument("--eta-grid", type=_float_list, default=list(DEFAULT_ETA_GRID))
    p.add_argument("--report", type=Path, help="report CSV")
    p.add_argument("--log", type=Path, help="convergence CSV of the order-2 reference run")
    p.add_argument("--curves-dir", type=Path, help="directory for per-configuration convergence CSVs")
    return parser


def _config_from(args) -> BoostConfig:
    try:
        return BoostConfig(
            n_rounds=args.rounds,
            learning_rate=args.eta,
            order=args.order,
            lam=args.lam,
            max_depth=args.max_depth,
            min_child_rows=args.min_child_rows,
            min_gain=args.min_gain,
            loss=args.loss,
            early_stop_rounds=args.early_stop,
            seed=args.seed,
            cubic_mode=CUBIC_MODE_FLAGS[args.cubic_mode],
            trust_alpha=args.trust_alpha,
            fourth_order_formula=FORMULA_FLAGS[args.fourth_order_formula],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(path, args, binary):
    return load_csv(
        path, label_column=args.label, has_header=not args.no_header,
        max_rows=args.max_rows, binary_labels=binary,
    )


def _datasets(args, need_test: bool):
    binary = args.loss == "logloss"
    if args.synthetic is not None:
        n, m = args.synthetic
        train, valid, test = split_dataset(make_synthetic(n, m, args.seed), seed=args.seed)
        return train, valid, test
    if args.train is None:
        raise UsageError("either --train or --synthetic is required")
    train = _load(args.train, args, binary)
    valid = _load(args.valid, args, binary) if args.valid else None
    test = None
    if need_test:
        if not getattr(args, "test", None):
            raise UsageError("--test is required with --train for the benchmark")
        test = _load(args.test, args, binary)
    return train, valid, test


def cmd_train(args) -> int:
    config = _config_from(args)
    train, valid, _ = _datasets(args, need_test=False)
    model, records = fit(train, config, valid=valid)
    model_store.save(model, args.model)
    if args.log:
        write_convergence_csv(records, args.log)
    last = records[-1] if records else None
    print(f"trained {len(model.trees)} trees (order {config.order}) -> {args.model}")
    if last is not None:
        print(f"train_loss {last.train_loss:.6f}")
        if last.valid_loss is not None:
            print(f"valid_loss {last.valid_loss:.6f}")
        if last.valid_accuracy is not None:
            print(f"valid_accuracy {last.valid_accuracy:.6f}")
        print(f"train_time_ms {last.cumulative_time_ms:.1f}")
    return 0


def cmd_predict(args) -> int:
    model = model_store.load(args.model)
    data = load_csv(args.data, label_column=args.label, has_header=not args.no_header,
                    max_rows=args.max_rows, binary_labels=False)
    scores = predict(model, data)
    logloss = model.config.loss == LossKind.LOGLOSS.value
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["raw_score", "probability"] if logloss else ["raw_score"])
        probs = sigmoid(scores) if logloss else None
        for i, s in enumerate(scores):
            row = [repr(float(s))]
            if logloss:
                row.append(repr(float(probs[i])))
            writer.writerow(row)
    finally:
        if args.output:
            out.close()
    return 0


def cmd_eval(args) -> int:
    model = model_store.load(args.model)
    data = load_csv(args.data, label_column=args.label, has_header=not args.no_header,
                    max_rows=args.max_rows,
                    binary_labels=model.config.loss == LossKind.LOGLOSS.value)
    if data.n_rows == 0:
        raise DataError(f"{args.data}: no data rows")
    loss, acc = evaluate(model, data)
    print(f"loss {loss!r}")
    print(f"accuracy {acc!r}")
    return 0


def cmd_benchmark(args) -> int:
    base = _config_from(args)
    if base.loss != LossKind.LOGLOSS.value:
        raise UsageError("the benchmark measures accuracy and needs --loss logloss")
    train, valid, test = _datasets(args, need_test=True)

    def progress(res):
        logger.info("order %d lambda %g eta %g: rounds %s", res.order, res.lam, res.eta,
                    res.rounds_to_threshold)

    report = run_benchmark(
        train, valid, test, base,
        orders=args.orders, lambdas=args.lambda_grid, etas=args.eta_grid, progress=progress,
    )
    print(format_report(report))
    if args.report:
        with open(args.report, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            writer.writerows(report_rows(report))
    if args.log:
        write_convergence_csv(report.reference.curve, args.log, extra_columns=("test_accuracy",))
    if args.curves_dir:
        args.curves_dir.mkdir(parents=True, exist_ok=True)
        for r in report.results:
            name = f"order{r.order}_lambda{r.lam:g}_eta{r.eta:g}.csv"
            write_convergence_csv(r.curve, args.curves_dir / name, extra_columns=("test_accuracy",))
    return 0


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hoboost: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ModelFormatError, DegenerateDenominatorError, OSError, ValueError) as exc:
        print(f"hoboost: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
