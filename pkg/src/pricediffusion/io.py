"""Dataset ingestion and artifact writers.

Accepted dataset headers (CSV, UTF-8, comma-separated)::

    period,price,cumulative_adopters,population
    period,price,adoption_fraction

With the first form the adopted fraction is ``cumulative_adopters / population``.
Floats are written with 17 significant digits so outputs round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .estimation import MIN_PERIODS, AdoptionSeries

COUNT_COLUMNS = ("period", "price", "cumulative_adopters", "population")
FRACTION_COLUMNS = ("period", "price", "adoption_fraction")


class DatasetError(ValueError):
    pass


def _number(text, row, column):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DatasetError(f"row {row}: column '{column}' is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DatasetError(f"row {row}: column '{column}' must be finite")
    return value


def read_dataset(path) -> AdoptionSeries:
    """Parse an adoption/price CSV; errors name the offending file row (header is row 1)."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if tuple(header) == COUNT_COLUMNS:
            counts = True
        elif tuple(header) == FRACTION_COLUMNS:
            counts = False
        else:
            raise DatasetError(
                f"row 1: header must be {','.join(COUNT_COLUMNS)} or {','.join(FRACTION_COLUMNS)}")

        periods, prices, fractions = [], [], []
        for row, fields in enumerate(reader, start=2):
            if not fields or all(not f.strip() for f in fields):
                raise DatasetError(f"row {row}: empty row")
            if len(fields) != len(header):
                raise DatasetError(f"row {row}: expected {len(header)} fields, got {len(fields)}")
            period = fields[0].strip()
            if not period:
                raise DatasetError(f"row {row}: missing period")
            price = _number(fields[1], row, "price")
            if price <= 0:
                raise DatasetError(f"row {row}: price must be > 0")
            if counts:
                adopters = _number(fields[2], row, "cumulative_adopters")
                population = _number(fields[3], row, "population")
                if population <= 0:
                    raise DatasetError(f"row {row}: population must be > 0")
                if adopters < 0:
                    raise DatasetError(f"row {row}: cumulative_adopters must be >= 0")
                frac = adopters / population
            else:
                frac = _number(fields[2], row, "adoption_fraction")
            if not 0.0 <= frac <= 1.0:
                raise DatasetError(f"row {row}: adoption fraction {frac} outside [0, 1]")
            if fractions and frac < fractions[-1]:
                raise DatasetError(f"row {row}: adoption decreases from {fractions[-1]} to {frac}")
            periods.append(period)
            prices.append(price)
            fractions.append(frac)

    if len(fractions) < MIN_PERIODS:
        raise DatasetError(f"{path}: need at least {MIN_PERIODS} periods, got {len(fractions)}")
    return AdoptionSeries(tuple(periods), np.array(prices), np.array(fractions))


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def _json_scalar(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return format(v, ".17g") if math.isfinite(v) else "null"
    return json.dumps(str(value))


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits; non-finite floats become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_json_scalar(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _json_scalar(obj)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj) + "\n", encoding="utf-8")
    return path


def write_table(path, columns, rows, fmt_name: str = "csv") -> Path:
    """Write rows as CSV, or as a JSON list of records when ``fmt_name == 'json'``."""
    path = Path(path)
    if fmt_name == "json":
        path = path.with_suffix(".json")
        write_json(path, [dict(zip(columns, r)) for r in rows])
        return path
    path = path.with_suffix(".csv")
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def read_prices(path) -> np.ndarray:
    """Price path from a CSV with a ``price`` column, or one number per line."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)]
    if not rows:
        raise DatasetError(f"{path}: empty file")
    first = [c.strip() for c in rows[0]]
    if "price" in first:
        col, body, start = first.index("price"), rows[1:], 2
    else:
        col, body, start = 0, rows, 1
    out = []
    for row, fields in enumerate(body, start=start):
        if col >= len(fields) or not fields[col].strip():
            raise DatasetError(f"row {row}: missing price")
        value = _number(fields[col], row, "price")
        if value < 0:
            raise DatasetError(f"row {row}: price must be >= 0")
        out.append(value)
    return np.array(out)
