"""Canonical JSON and CSV output.

JSON is written with sorted keys, Python's shortest round-trip float repr
(at most 17 significant digits), UTF-8 and LF line endings, so parsing an
emitted file and writing it again reproduces it byte for byte.  Non-finite
floats become ``null``.

Record schema::

    {kind, config, prediction, distribution: {xi: [...], p: [...], ...},
     peak, width, verdict: {pass, reason, checks: [{name, value, tolerance, bound}]},
     extras}

The sweep CSV has the header in :data:`SWEEP_CSV_HEADER`, one row per level.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, is_dataclass

import numpy as np

from .protocol import GameRecord, SweepTable, Verdict

SWEEP_CSV_HEADER = ("level", "sigma_plus", "lambda", "epsilon", "peak", "peak_error", "width")


def _clean(obj):
    """Recursively convert to JSON-native types with non-finite floats mapped to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if obj is None or isinstance(obj, str):
        return obj
    if is_dataclass(obj):
        return _clean(asdict(obj))
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Canonical JSON text, newline terminated."""
    return json.dumps(_clean(obj), sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def verdict_dict(verdict: Verdict) -> dict:
    return {"pass": verdict.passed, "reason": verdict.reason,
            "checks": [{"name": c.name, "value": c.value, "tolerance": c.tolerance, "bound": c.bound}
                       for c in verdict.checks]}


def record_dict(record: GameRecord, config: dict) -> dict:
    dist = dict(record.distribution)
    dist.setdefault("xi", [])
    dist.setdefault("p", [])
    return {
        "kind": record.kind,
        "config": config,
        "prediction": list(record.prediction),
        "distribution": dist,
        "peak": list(record.peak),
        "width": list(record.width),
        "verdict": verdict_dict(record.verdict),
        "extras": {"angles": list(record.angles), "seed": record.seed, "numerics": record.numerics,
                   **record.extras},
    }


def sweep_dict(table: SweepTable, config: dict) -> dict:
    return {
        "kind": "sweep",
        "config": config,
        "prediction": [table.prediction],
        "distribution": {"xi": [], "p": [], "levels": [asdict(lv) for lv in table.levels]},
        "peak": [lv.peak for lv in table.levels],
        "width": [lv.width for lv in table.levels],
        "verdict": verdict_dict(table.verdict),
        "extras": {"phi": table.phi, "grid": list(table.grid),
                   "extrapolated_peak_error": table.extrapolated_peak_error,
                   "richardson_order": table.richardson_order, "notice": table.notice},
    }


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def sweep_csv(table: SweepTable) -> str:
    rows = [",".join(SWEEP_CSV_HEADER)]
    for k, lv in enumerate(table.levels):
        rows.append(",".join(_fmt(v) for v in (k, lv.sigma_plus, lv.lam, lv.epsilon, lv.peak,
                                               lv.peak_error, lv.width)))
    return "\n".join(rows) + "\n"


def distribution_csv(xi, p) -> str:
    rows = ["xi,p"] + [f"{_fmt(a)},{_fmt(b)}" for a, b in zip(xi, p)]
    return "\n".join(rows) + "\n"


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
