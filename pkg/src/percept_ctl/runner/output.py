"""Writers for summary.json, trajectory.csv and plot.svg."""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

SVG_HASHSALT = "percept-ctl"


def jsonable(obj):
    """Plain JSON types; numpy scalars and arrays unwrap, non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def write_summary(path, summary: dict):
    text = json.dumps(jsonable(summary), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path, columns, rows):
    """Header row plus one row per sample, floats at 17 significant digits."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(columns):
        raise ValueError(f"{len(columns)} columns but rows have {rows.shape[1]} entries")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_float(v) for v in row) + "\n")


def write_svg(path, draw, figsize=(7.0, 5.0)):
    """Render ``draw(fig)`` to a self-contained SVG with no timestamp."""
    import matplotlib

    matplotlib.use("Agg", force=True)
    from matplotlib.figure import Figure

    with matplotlib.rc_context({"svg.hashsalt": SVG_HASHSALT, "svg.fonttype": "path"}):
        fig = Figure(figsize=figsize)
        draw(fig)
        fig.savefig(path, format="svg", metadata={"Date": None})


def output_root() -> Path:
    return Path(os.environ.get("PERCEPT_CTL_OUTPUT", "percept_ctl_out"))
