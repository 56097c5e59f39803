"""Convergence-log CSV output."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

from .booster import RoundRecord

CONVERGENCE_COLUMNS = (
    "round",
    "train_loss",
    "valid_loss",
    "valid_accuracy",
    "cumulative_time_ms",
    "fallback_count",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_convergence_csv(
    records: Iterable[RoundRecord], path, extra_columns: Sequence[str] = ()
) -> None:
    """One line per round. ``extra_columns`` are read from ``record.extra``."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*CONVERGENCE_COLUMNS, *extra_columns])
        for rec in records:
            row = [getattr(rec, c) for c in CONVERGENCE_COLUMNS]
            row += [rec.extra.get(c) for c in extra_columns]
            writer.writerow([_fmt(v) for v in row])


def read_convergence_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
