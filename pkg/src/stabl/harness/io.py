"""Dataset CSV parsing and deterministic report writers."""
from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..learners import Dataset

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def parse_number(text: str, line: int | None = None) -> float:
    cell = text.strip()
    if not _NUMBER.match(cell):
        raise ParseError(f"not a decimal number: {text!r}", line)
    return float(cell)


def parse_point(text: str) -> np.ndarray:
    """A covariate vector written as ``v1,v2,...``."""
    return np.array([parse_number(v) for v in text.split(",")], dtype=np.float64)


def load_dataset(path) -> Dataset:
    """Read a CSV with header ``x_1,...,x_d,y``; row order is preserved."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file: expected header x_1,...,x_d,y", 1) from None
        header = [h.strip() for h in header]
        d = len(header) - 1
        expected = [f"x_{j}" for j in range(1, d + 1)] + ["y"]
        if d < 1 or header != expected:
            raise ParseError(f"header must be x_1,...,x_d,y; got {','.join(header)}", 1)
        rows = []
        for record in reader:
            line = reader.line_num
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != d + 1:
                raise ParseError(f"expected {d + 1} cells, found {len(record)}", line)
            rows.append([parse_number(c, line) for c in record])
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), d + 1)
    return Dataset(arr[:, :d], arr[:, d])


def write_dataset(data: Dataset, path) -> None:
    header = [f"x_{j}" for j in range(1, data.d + 1)] + ["y"]
    write_csv(path, header, [list(data.X[i]) + [data.y[i]] for i in range(data.n)])


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def write_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits (nan as null, inf as a string)."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "null"
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        text = format_float(v)
        return text if any(ch in text for ch in ".en") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{to_json(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(to_json(v) for v in seq) + "]"
        items = [inner + to_json(v, indent, _level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def emit_report(report: dict, path) -> None:
    Path(path).write_text(to_json(report) + "\n", encoding="utf-8")
