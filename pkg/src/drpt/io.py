"""CSV ingestion and ratio specifications."""

from __future__ import annotations

import csv
import json
import os
import re
from typing import Optional

import numpy as np

from .ratio import ExpressionRatio, PooledSample, PrecomputedRatio, RatioFunction, TableRatio

_XCOL = re.compile(r"^x(\d+)$")


def load_csv(path: str):
    """Read a pooled sample from CSV.

    Columns: ``x1..xd`` (or ``cat`` for category codes), ``sample`` in
    ``{1, 2}`` and optionally ``r``.  Returns ``(sample, r_or_None)`` with the
    first-sample rows first, file order kept within each sample.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        rows = [{k.strip(): (v or "").strip() for k, v in row.items() if k is not None} for row in reader]
    if "sample" not in header:
        raise ValueError("CSV needs a 'sample' column with values 1 or 2")
    xcols = sorted((c for c in header if _XCOL.match(c)), key=lambda c: int(c[1:]))
    categorical = "cat" in header
    if categorical == bool(xcols):
        raise ValueError("CSV needs either x1..xd columns or a single 'cat' column")
    if xcols and [int(c[1:]) for c in xcols] != list(range(1, len(xcols) + 1)):
        raise ValueError("coordinate columns must be x1..xd without gaps")
    labels = np.array([int(float(r["sample"])) for r in rows])
    if not set(labels.tolist()) <= {1, 2}:
        raise ValueError("the 'sample' column may only contain 1 and 2")
    order = np.r_[np.flatnonzero(labels == 1), np.flatnonzero(labels == 2)]
    n, m = int(np.sum(labels == 1)), int(np.sum(labels == 2))
    if categorical:
        pts = np.array([int(r["cat"]) for r in rows], dtype=np.int64)[order]
        sample = PooledSample(pts, n, m, int(pts.max()) + 1 if pts.size else None)
    else:
        pts = np.array([[float(r[c]) for c in xcols] for r in rows])[order]
        sample = PooledSample(pts, n, m)
    rvals = None
    if "r" in header:
        rvals = np.array([float(r["r"]) for r in rows])[order]
    return sample, rvals


def parse_ratio(spec: str, rcolumn: Optional[np.ndarray] = None, params: Optional[dict] = None) -> RatioFunction:
    """``column:r``, a JSON table file, or an arithmetic expression."""
    if spec.startswith("column:"):
        if spec[len("column:"):] != "r" or rcolumn is None:
            raise ValueError("'column:r' needs an 'r' column in the data file")
        return PrecomputedRatio(rcolumn)
    if spec.endswith(".json") and os.path.exists(spec):
        with open(spec, encoding="utf-8") as fh:
            table = json.load(fh)
        if isinstance(table, list):
            return TableRatio.from_sequence(table)
        return TableRatio({int(k): float(v) for k, v in table.items()})
    return ExpressionRatio(spec, params or {})


def parse_grid(spec: str) -> list:
    """``start:stop:step`` (stop included) or a comma-separated list."""
    if ":" in spec:
        start, stop, step = (float(s) for s in spec.split(":"))
        if step <= 0 or stop < start:
            raise ValueError("grid needs step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    vals = [float(s) for s in spec.split(",") if s.strip()]
    if not vals:
        raise ValueError("empty grid")
    return vals
