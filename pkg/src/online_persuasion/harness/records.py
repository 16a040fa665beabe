"""Run artifacts: per-round CSV, JSON summary and the regret report.

Floats are written with a fixed 12-significant-digit format so that a run
repeated with the same configuration and seed produces identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError, InstanceValidationError, ParamError, PersuasionError
from .environments import run_environment

CSV_HEADER = ("t", "decision_hash", "types", "state", "utility", "cum_utility", "cum_regret")
SCHEMA = "v1"
ROUNDS_FILE = "rounds.csv"
SUMMARY_FILE = "summary.json"
PARTIAL_MARKER = "PARTIAL"


def fmt(x):
    s = f"{float(x):.12g}"
    return "0" if s == "-0" else s


def decision_hash(x):
    """Short digest of a decision rounded to 1e-9 (so that solver noise
    below that level does not change the identifier)."""
    v = np.round(np.asarray(x, dtype=float), 9) + 0.0
    return hashlib.sha256(v.tobytes()).hexdigest()[:16]


def round_rows(trace):
    cum_u = np.cumsum(trace.utility)
    cum_r = np.cumsum(trace.comparator - trace.expected)
    for t in range(len(trace.utility)):
        yield (t, decision_hash(trace.decisions[t]), trace.types[t], int(trace.states[t]),
               fmt(trace.utility[t]), fmt(cum_u[t]), fmt(cum_r[t]))


def csv_text(trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(round_rows(trace))
    return buf.getvalue()


def regret_report(trace):
    """Regret against the best fixed decision in hindsight, the bound for
    the configured learner and their ratio."""
    T = len(trace.expected)
    hind = float(trace.comparator.sum())
    learner = float(trace.expected.sum())
    regret = hind - learner
    return {"T": T, "regret": regret, "bound": float(trace.bound),
            "bound_formula": trace.bound_name,
            "ratio": regret / trace.bound if trace.bound > 0 else None,
            "hindsight_utility": hind, "expected_utility": learner,
            "realized_utility": float(trace.utility.sum())}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def summary(trace, cfg, status="complete"):
    out = {"schema": SCHEMA, "status": status, "config": cfg.to_dict()}
    out.update(regret_report(trace))
    out["per_round_expected_utility"] = [float(x) for x in trace.expected]
    out.update(trace.extras)
    return _jsonable(out)


def write_run(trace, cfg, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / ROUNDS_FILE).write_text(csv_text(trace))
    summ = summary(trace, cfg)
    (out / SUMMARY_FILE).write_text(json.dumps(summ, indent=1, sort_keys=True) + "\n")
    marker = out / PARTIAL_MARKER
    if marker.exists():
        marker.unlink()
    return summ


def run_experiment(cfg, out_dir=None):
    """Run one configuration; writes ``rounds.csv`` and ``summary.json``
    under ``out_dir`` (default: the configured output path) and returns
    ``(trace, summary)``.

    Solver failures leave a ``PARTIAL`` marker and a summary with status
    ``aborted`` before the error is re-raised.
    """
    out = Path(out_dir if out_dir is not None else cfg.output)
    try:
        trace = run_environment(cfg)
    except (ConfigError, InstanceValidationError, ParamError):
        raise
    except PersuasionError as exc:
        out.mkdir(parents=True, exist_ok=True)
        (out / PARTIAL_MARKER).write_text(f"{type(exc).__name__}: {exc}\n")
        info = {"schema": SCHEMA, "status": "aborted", "config": cfg.to_dict(),
                "error": f"{type(exc).__name__}: {exc}"}
        (out / SUMMARY_FILE).write_text(json.dumps(_jsonable(info), indent=1, sort_keys=True) + "\n")
        raise
    return trace, write_run(trace, cfg, out)


def read_rounds(path):
    """Rows of a rounds CSV as dicts with numeric fields parsed."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["t"], r["state"] = int(r["t"]), int(r["state"])
        for k in ("utility", "cum_utility", "cum_regret"):
            r[k] = float(r[k])
    return rows


def check_rounds(rows):
    """Largest deviation of the cumulative utility column from the prefix
    sums of the utility column."""
    u = np.array([r["utility"] for r in rows])
    cu = np.array([r["cum_utility"] for r in rows])
    if not len(u):
        return 0.0
    # the columns are rounded to 12 significant digits
    return float(np.max(np.abs(np.cumsum(u) - cu) / np.maximum(1.0, np.abs(cu))))
