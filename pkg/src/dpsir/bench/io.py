"""CSV ingestion and report export."""

import csv
import json
import math

import numpy as np

from ..errors import InvalidInput, ParseError
from ..sir import Dataset
from .harness import RunReport

CSV_FIELDS = (
    "model", "n", "p", "method", "mean_loss", "sd_loss", "mean_k",
    "mean_runtime_ms", "eps", "delta", "reps", "config_hash",
)


def _parse_float(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric cell {text!r}", row=row, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite cell {text!r}", row=row, column=column)
    return value


def ingest_csv(path, response_column, standardize=False, center=True, delimiter=",", labels=False):
    """Read a rectangular CSV with a header row into a :class:`Dataset`.

    Every column other than ``response_column`` must be numeric. With
    ``labels=True`` the response is kept as strings (a categorical response);
    otherwise it must be numeric too. ``standardize`` rescales each covariate
    to mean 0 and sd 1 (population sd). Row numbers in errors are 1-based
    file lines.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("file is empty", row=1) from None
        if response_column not in header:
            raise ParseError(f"response column {response_column!r} not found", row=1, column=response_column)
        if len(set(header)) != len(header):
            raise ParseError("duplicate column names in header", row=1)
        j_resp = header.index(response_column)
        names = [h for i, h in enumerate(header) if i != j_resp]
        if not names:
            raise InvalidInput("the file has no covariate columns")
        rows, ys = [], []
        for line_no, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(rec)}", row=line_no)
            vals = []
            for i, cell in enumerate(rec):
                if i == j_resp:
                    continue
                vals.append(_parse_float(cell.strip(), line_no, header[i]))
            rows.append(vals)
            cell = rec[j_resp].strip()
            ys.append(cell if labels else _parse_float(cell, line_no, response_column))
    if len(rows) < 2:
        raise InvalidInput(f"need at least 2 data rows, found {len(rows)}")
    X = np.asarray(rows, dtype=float)
    y = np.asarray(ys, dtype=object if labels else float)
    if labels:
        y = y.astype(str)
    if standardize:
        sd = X.std(axis=0)
        if np.any(sd == 0):
            bad = [names[i] for i in np.flatnonzero(sd == 0)]
            raise InvalidInput(f"cannot standardize constant columns {bad}")
        X = (X - X.mean(axis=0)) / sd
    return Dataset.from_arrays(X, y, center=center, names=names)


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def export_report(report, fmt, path):
    """Write ``report`` as ``"csv"`` (one row per cell and method) or ``"json"``."""
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True, allow_nan=False)
        return
    if fmt != "csv":
        raise InvalidInput(f"unknown format {fmt!r}; use 'csv' or 'json'")
    chash = report.metadata.get("config_hash", "")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for row in report.rows:
            w.writerow([_fmt(row.get(f)) for f in CSV_FIELDS[:-1]] + [chash])


def load_report(path):
    with open(path) as fh:
        return RunReport.from_dict(json.load(fh))
