"""CSV output with a fixed, platform-stable number format."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "{:.16e}"  # 17 significant digits


def format_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return FLOAT_FORMAT.format(x)


def write_csv(path, columns: dict):
    """Write equal-length columns; ``None`` entries become empty fields."""
    names = list(columns)
    cols = [list(columns[k]) for k in names]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("CSV columns must have equal length")
    lines = [",".join(names)]
    for i in range(n):
        lines.append(",".join("" if c[i] is None else format_float(c[i]) for c in cols))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Inverse of :func:`write_csv` (empty fields become ``nan``)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    return {name: np.array([float(r[i]) if r[i] else math.nan for r in rows])
            for i, name in enumerate(header)}
