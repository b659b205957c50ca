"""CSV report schema.

One row per (policy, lambda, replication).  Columns:

policy, lambda, replication, mean_completion_time, completed, backlog_slope,
invariant_violations, seed

Floats are written with ``repr`` so they round-trip at full double precision;
``lambda`` is the total arrival rate and ``replication`` is 1-based.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .sim import MetricsReport

COLUMNS = ["policy", "lambda", "replication", "mean_completion_time", "completed",
           "backlog_slope", "invariant_violations", "seed"]


@dataclass
class ReportRow:
    policy: str
    lam: float
    replication: int
    mean_completion_time: float
    completed: int
    backlog_slope: float
    invariant_violations: int
    seed: int

    @classmethod
    def from_metrics(cls, r: MetricsReport) -> "ReportRow":
        return cls(r.policy, r.lam, r.replication + 1, r.mean_completion_time, r.completed,
                   r.backlog_slope, r.invariant_violations, r.seed)


def rows_to_csv(rows: Iterable[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([r.policy, repr(r.lam), r.replication, repr(r.mean_completion_time), r.completed,
                    repr(r.backlog_slope), r.invariant_violations, r.seed])
    return buf.getvalue()


def write_csv(rows: Iterable[ReportRow], path: str | Path) -> None:
    Path(path).write_text(rows_to_csv(rows))


def read_csv(path: str | Path) -> list[ReportRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        missing = set(COLUMNS) - set(reader.fieldnames)
        if missing:
            raise ValueError(f"report is missing columns {sorted(missing)}")
        return [
            ReportRow(row["policy"], float(row["lambda"]), int(row["replication"]),
                      float(row["mean_completion_time"]), int(row["completed"]),
                      float(row["backlog_slope"]), int(row["invariant_violations"]), int(row["seed"]))
            for row in reader
        ]
