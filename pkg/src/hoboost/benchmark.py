"""Time-to-accuracy comparison between optimization orders.

Protocol:

1. Train an order-2 reference model for the full round budget and record
   the best test accuracy it reaches along the way.
2. The threshold is 99% of that accuracy (multiplicative).
3. Train every (order, lambda, eta) configuration until its test accuracy
   reaches the threshold or the budget runs out, recording rounds and
   training wall time.
4. Gap % for a configuration is ``100 (t_k - t_2) / t_2`` against the
   order-2 run with the same lambda and eta.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .booster import BoostConfig, RoundRecord, accuracy, fit
from .data import Dataset
from .tree import predict_tree_batch

logger = logging.getLogger(__name__)

THRESHOLD_FRACTION = 0.99
DEFAULT_LAMBDA_GRID = (1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6)
DEFAULT_ETA_GRID = (0.1, 0.3, 1.0)


@dataclass
class ConfigResult:
    order: int
    lam: float
    eta: float
    best_accuracy: float
    rounds_to_threshold: Optional[int]
    time_to_threshold_ms: Optional[float]
    rounds_run: int
    fallback_total: int
    gap_percent: Optional[float] = None
    curve: list = field(default_factory=list, repr=False)

    @property
    def reached(self) -> bool:
        return self.rounds_to_threshold is not None


@dataclass
class BenchmarkReport:
    reference: ConfigResult
    threshold_accuracy: float
    results: list[ConfigResult]

    def best(self, order: int, key: str = "time") -> ConfigResult | None:
        """Fastest configuration of ``order`` that reached the threshold.

        ``key`` is ``"time"`` or ``"rounds"``; ties go to the other measure.
        """
        reached = [r for r in self.results if r.order == order and r.reached]
        if not reached:
            return None
        if key == "rounds":
            return min(reached, key=lambda r: (r.rounds_to_threshold, r.time_to_threshold_ms))
        return min(reached, key=lambda r: (r.time_to_threshold_ms, r.rounds_to_threshold))

    def summary(self, key: str = "time") -> list[dict]:
        """One line per order in the layout of a time-to-accuracy table."""
        orders = sorted({r.order for r in self.results})
        base = self.best(2, key)
        lines = []
        for order in orders:
            b = self.best(order, key)
            gap = None
            if b is not None and base is not None and base.time_to_threshold_ms > 0:
                gap = 100.0 * (b.time_to_threshold_ms - base.time_to_threshold_ms) / base.time_to_threshold_ms
            if b is not None and b is base:
                gap = 0.0
            lines.append({
                "model": f"GBDT-{order}",
                "time_s": None if b is None else b.time_to_threshold_ms / 1000.0,
                "rounds": None if b is None else b.rounds_to_threshold,
                "gap_percent": gap,
                "lam": None if b is None else b.lam,
                "eta": None if b is None else b.eta,
            })
        return lines


def _fmt(x, spec):
    return "not reached" if x is None else format(x, spec)


def format_report(report: BenchmarkReport) -> str:
    out = [
        f"reference: order 2, lambda={report.reference.lam:g}, eta={report.reference.eta:g}, "
        f"best test accuracy {report.reference.best_accuracy:.4f} "
        f"over {report.reference.rounds_run} rounds",
        f"threshold (99% of best): {report.threshold_accuracy:.4f}",
        "",
        f"{'order':>5} {'lambda':>9} {'eta':>5} {'best_acc':>9} {'rounds':>11} "
        f"{'time_ms':>11} {'gap%':>8} {'fallbacks':>9}",
    ]
    for r in report.results:
        out.append(
            f"{r.order:>5} {r.lam:>9g} {r.eta:>5g} {r.best_accuracy:>9.4f} "
            f"{_fmt(r.rounds_to_threshold, 'd'):>11} {_fmt(r.time_to_threshold_ms, '.1f'):>11} "
            f"{_fmt(r.gap_percent, '.0f'):>8} {r.fallback_total:>9}"
        )
    out += ["", f"{'model':<8} {'time (s)':>10} {'rounds':>11} {'gap %':>7}   best config"]
    for line in report.summary():
        cfg = "" if line["lam"] is None else f"lambda={line['lam']:g} eta={line['eta']:g}"
        out.append(
            f"{line['model']:<8} {_fmt(line['time_s'], '.3f'):>10} "
            f"{_fmt(line['rounds'], 'd'):>11} {_fmt(line['gap_percent'], '.0f'):>7}   {cfg}"
        )
    return "\n".join(out)


REPORT_COLUMNS = (
    "order", "lambda", "eta", "best_accuracy", "threshold_accuracy",
    "rounds_to_threshold", "time_to_threshold_ms", "gap_percent", "rounds_run", "fallback_total",
)


def report_rows(report: BenchmarkReport) -> list[list]:
    rows = []
    for r in report.results:
        rows.append([
            r.order, r.lam, r.eta, r.best_accuracy, report.threshold_accuracy,
            "not reached" if r.rounds_to_threshold is None else r.rounds_to_threshold,
            "not reached" if r.time_to_threshold_ms is None else r.time_to_threshold_ms,
            "" if r.gap_percent is None else r.gap_percent,
            r.rounds_run, r.fallback_total,
        ])
    return rows


def _run(train, valid, test, config: BoostConfig, threshold: float | None) -> ConfigResult:
    test_pred = None
    best = -np.inf
    hit: list[RoundRecord] = []

    def track(rec: RoundRecord, model) -> bool:
        nonlocal test_pred, best
        tree = model.trees[-1]
        if test_pred is None:
            test_pred = np.full(test.n_rows, model.base_score)
        test_pred = test_pred + config.learning_rate * predict_tree_batch(tree, test.columns)
        acc = accuracy(test.labels, test_pred)
        rec.extra["test_accuracy"] = acc
        best = max(best, acc)
        if threshold is not None and acc >= threshold:
            hit.append(rec)
            return True
        return False

    _, records = fit(train, config, valid=valid, callback=track)
    first = hit[0] if hit else None
    return ConfigResult(
        order=config.order,
        lam=config.lam,
        eta=config.learning_rate,
        best_accuracy=float(best),
        rounds_to_threshold=None if first is None else first.round,
        time_to_threshold_ms=None if first is None else first.cumulative_time_ms,
        rounds_run=len(records),
        fallback_total=sum(r.fallback_count for r in records),
        curve=records,
    )


def _truncate_at_threshold(ref: ConfigResult, threshold: float) -> ConfigResult:
    for i, rec in enumerate(ref.curve):
        if rec.extra["test_accuracy"] >= threshold:
            curve = ref.curve[: i + 1]
            return dataclasses.replace(
                ref,
                best_accuracy=max(r.extra["test_accuracy"] for r in curve),
                rounds_to_threshold=rec.round,
                time_to_threshold_ms=rec.cumulative_time_ms,
                rounds_run=len(curve),
                fallback_total=sum(r.fallback_count for r in curve),
                curve=curve,
            )
    raise AssertionError("reference run never reached its own threshold")


def run_benchmark(
    train: Dataset,
    valid: Dataset | None,
    test: Dataset,
    base: BoostConfig,
    orders: Sequence[int] = (2, 3, 4),
    lambdas: Sequence[float] = (1.0,),
    etas: Sequence[float] = (0.1,),
    progress: Callable[[ConfigResult], None] | None = None,
) -> BenchmarkReport:
    """Run the reference and every grid configuration sequentially.

    ``base`` supplies the round budget, tree shape and solver options; the
    reference uses ``base.lam`` and ``base.learning_rate`` at order 2.
    """
    ref_config = dataclasses.replace(base, order=2)
    reference = _run(train, valid, test, ref_config, threshold=None)
    threshold = THRESHOLD_FRACTION * reference.best_accuracy
    logger.info("reference best accuracy %.4f, threshold %.4f", reference.best_accuracy, threshold)

    results: list[ConfigResult] = []
    for order in orders:
        for lam in lambdas:
            for eta in etas:
                config = dataclasses.replace(base, order=order, lam=lam, learning_rate=eta)
                if config == ref_config:
                    res = _truncate_at_threshold(reference, threshold)
                else:
                    res = _run(train, valid, test, config, threshold)
                results.append(res)
                if progress is not None:
                    progress(res)

    order2 = {(r.lam, r.eta): r for r in results if r.order == 2}
    for r in results:
        ref2 = order2.get((r.lam, r.eta))
        if r is ref2 and r.reached:
            r.gap_percent = 0.0
        elif ref2 is not None and r.reached and ref2.reached and ref2.time_to_threshold_ms > 0:
            r.gap_percent = (
                100.0 * (r.time_to_threshold_ms - ref2.time_to_threshold_ms)
                / ref2.time_to_threshold_ms
            )
    return BenchmarkReport(reference=reference, threshold_accuracy=threshold, results=results)
