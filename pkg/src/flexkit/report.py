"""Rendering of results as JSON, CSV and DOT with a provenance header."""
from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from . import __version__

SIG = 6


def fmt(x):
    """A number as text with six significant digits; blanks for missing values."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG}g}"


def rounded(obj):
    """Recursively round floats to six significant digits for JSON output."""
    if isinstance(obj, dict):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return fmt(x)  # JSON has no literal for inf/nan
        return float(f"{x:.{SIG}g}")
    return obj


def provenance(command, seed=None, tolerances=None, **extra):
    prov = {"tool": "flexkit", "version": __version__, "command": command}
    if seed is not None:
        prov["seed"] = seed
    prov["tolerances"] = dict(tolerances or {})
    prov.update(extra)
    return prov


def _header_line(prov):
    parts = [f"{prov['tool']} {prov['version']}", f"command={prov['command']}"]
    if "seed" in prov:
        parts.append(f"seed={prov['seed']}")
    parts += [f"{k}={fmt(v) if isinstance(v, float) else v}"
              for k, v in prov["tolerances"].items()]
    return " ".join(parts)


def render_json(payload, prov):
    return json.dumps(rounded({"provenance": prov, **payload}), indent=2) + "\n"


def render_csv(columns, rows, prov):
    buf = io.StringIO()
    buf.write(f"# {_header_line(prov)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def render_dot(text, prov):
    return f"// {_header_line(prov)}\n{text}"


# --- tables -------------------------------------------------------------------------

RANK_COLUMNS = ["rank", "constraints", "F", "increase_pct"]
COMPARE_COLUMNS = ["design", "F_box", "F_ellip", "alpha_star_pct", "SF_pct"]
COMPONENT_COLUMNS = ["component", "level", "F", "labels"]


def rank_rows(levels):
    return [{"rank": lv.level, "constraints": lv.constraint_labels, "F": lv.F_value,
             "increase_pct": lv.increase_pct} for lv in levels]
