"""Result tables written as CSV."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional

from ..errors import ContractError, FormatError

COLUMNS = ("experiment", "params", "statistic", "value", "std_error", "replicas")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def format_params(params: dict) -> str:
    return ";".join(f"{k}={_fmt(v)}" for k, v in params.items())


@dataclass
class Row:
    experiment: str
    params: dict
    statistic: str
    value: float
    std_error: Optional[float]
    replicas: int


@dataclass
class ResultTable:
    """Rows of ``(experiment, params, statistic, value, std_error, replicas)``.

    A standard error is required whenever a row aggregates more than one
    replica.
    """

    experiment: str
    rows: List[Row] = field(default_factory=list)

    def add(self, params: dict, statistic: str, value, std_error=None, replicas: int = 1) -> None:
        if replicas > 1 and std_error is None:
            raise ContractError(f"row {statistic!r} aggregates {replicas} replicas but has no std error")
        self.rows.append(Row(self.experiment, dict(params), statistic, float(value),
                             None if std_error is None else float(std_error), int(replicas)))

    def select(self, statistic: str, **params) -> List[Row]:
        out = []
        for row in self.rows:
            if row.statistic != statistic:
                continue
            if all(_fmt(row.params.get(k)) == _fmt(v) for k, v in params.items()):
                out.append(row)
        return out

    def value(self, statistic: str, **params) -> float:
        rows = self.select(statistic, **params)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {statistic} {params}")
        return rows[0].value

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self.rows:
            writer.writerow([r.experiment, format_params(r.params), r.statistic, _fmt(r.value),
                             _fmt(r.std_error), r.replicas])
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def read_csv(path) -> ResultTable:
    """Read a table back; parameter values stay strings."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != COLUMNS:
            raise FormatError(f"unexpected header {header}", path=path, line=1)
        table = None
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(COLUMNS):
                raise FormatError(f"expected {len(COLUMNS)} fields", path=path, line=lineno)
            exp, params, stat, value, se, reps = rec
            if table is None:
                table = ResultTable(exp)
            pdict = dict(item.split("=", 1) for item in params.split(";") if item)
            table.rows.append(Row(exp, pdict, stat, float(value),
                                  float(se) if se else None, int(reps)))
    return table if table is not None else ResultTable("")


def mean_and_se(values) -> tuple:
    vals = [float(v) for v in values]
    n = len(vals)
    mean = math.fsum(vals) / n
    if n < 2:
        return mean, None
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var / n)
