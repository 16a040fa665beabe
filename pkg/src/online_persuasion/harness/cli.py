"""Command line: ``run``, ``generate``, ``report`` and ``sweep``.

Exit codes: 0 success, 2 configuration error, 3 instance validation error,
4 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..errors import ConfigError, InstanceValidationError, ParamError, PersuasionError
from .config import FEATURES, ExperimentConfig
from .instances import generate_instance
from .records import ROUNDS_FILE, SUMMARY_FILE, check_rounds, read_rounds, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_INSTANCE, EXIT_SOLVER = 0, 2, 3, 4

log = logging.getLogger("online_persuasion")


def _load(args):
    cfg = ExperimentConfig.load(args.config)
    return cfg.with_overrides(seed=args.seed, output=args.out,
                              features=args.feature or None)


def cmd_run(args):
    cfg = _load(args)
    if args.horizon is not None:
        cfg = cfg.with_overrides(horizon=args.horizon)
    _, summ = run_experiment(cfg)
    print(f"{cfg.environment} {cfg.algorithm} T={summ['T']} seed={cfg.seed}: "
          f"regret {summ['regret']:.4g}, bound {summ['bound']:.4g} -> {cfg.output}")
    return EXIT_OK


def cmd_generate(args):
    params = json.loads(args.params) if args.params else {}
    for key in ("n", "states", "types", "actions", "sender"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    inst = generate_instance(params, args.seed or 0)
    out = Path(args.out or "instance.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    inst.save(out)
    print(f"wrote {out}")
    return EXIT_OK


def _run_cell(cell):
    cfg_dict, out = cell
    cfg = ExperimentConfig.from_dict(cfg_dict)
    _, summ = run_experiment(cfg, out)
    return out, summ["regret"], summ["bound"]


def cmd_sweep(args):
    base = _load(args)
    horizons = args.horizons or [base.horizon]
    seeds = args.seeds if args.seeds else list(range(args.n_seeds))
    root = Path(args.out or base.output)
    cells = []
    for T in horizons:
        for s in seeds:
            cfg = base.with_overrides(seed=s, horizon=T)
            cells.append((cfg.to_dict(), str(root / f"T{T}" / f"seed{s}")))
    workers = args.workers or min(len(cells), os.cpu_count() or 1)
    if workers <= 1:
        results = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, cells))
    for out, reg, bound in results:
        log.info("%s regret %.4g bound %.4g", out, reg, bound)
    agg = aggregate(root)
    print(format_aggregate(agg))
    return EXIT_OK


def aggregate(root):
    """Merge the summaries found under ``root``: mean and max regret per
    horizon, with the bound."""
    by_T = {}
    for path in sorted(Path(root).rglob(SUMMARY_FILE)):
        summ = json.loads(path.read_text())
        if summ.get("status") != "complete":
            continue
        by_T.setdefault(summ["T"], []).append(summ)
    rows = []
    for T in sorted(by_T):
        reg = np.array([s["regret"] for s in by_T[T]])
        rows.append({"T": T, "runs": len(reg), "mean_regret": float(reg.mean()),
                     "max_regret": float(reg.max()), "bound": by_T[T][0]["bound"]})
    out = {"schema": "v1", "cells": rows}
    if len(rows) >= 2:
        from ..regret import regret_slope
        out["slope"] = regret_slope([r["T"] for r in rows], [r["mean_regret"] for r in rows])
    Path(root, "aggregate.json").write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    return out


def format_aggregate(agg):
    lines = [f"{'T':>7} {'runs':>5} {'mean R_T':>10} {'max R_T':>10} {'bound':>10}"]
    for r in agg["cells"]:
        lines.append(f"{r['T']:>7} {r['runs']:>5} {r['mean_regret']:>10.4g} "
                     f"{r['max_regret']:>10.4g} {r['bound']:>10.4g}")
    if "slope" in agg:
        lines.append(f"log-log slope of mean regret: {agg['slope']:.3f}")
    return "\n".join(lines)


def cmd_report(args):
    root = Path(args.out or "out")
    if (root / SUMMARY_FILE).exists():
        summ = json.loads((root / SUMMARY_FILE).read_text())
        if summ.get("status") != "complete":
            print(f"run aborted: {summ.get('error')}")
            return EXIT_SOLVER
        drift = check_rounds(read_rounds(root / ROUNDS_FILE))
        print(f"T={summ['T']} regret {summ['regret']:.6g} bound {summ['bound']:.6g} "
              f"({summ['bound_formula']}) ratio {summ['ratio']:.4g}; "
              f"prefix-sum drift {drift:.2e}")
        for key in ("max_deviation_gain", "max_ic_gain", "discretization_error"):
            if key in summ:
                print(f"{key}: {summ[key]:.3g}")
        return EXIT_OK
    agg = aggregate(root)
    if not agg["cells"]:
        raise ConfigError(f"no completed runs under {root}")
    print(format_aggregate(agg))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="online-persuasion",
                                description="Online Bayesian persuasion simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, need_config=True):
        sp.add_argument("--config", required=need_config)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--feature", action="append", choices=FEATURES)

    sp = sub.add_parser("run", help="run one experiment")
    common(sp)
    sp.add_argument("--horizon", type=int)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("generate", help="write a random instance JSON")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--params", help="JSON object of generator parameters")
    sp.add_argument("--n", type=int)
    sp.add_argument("--states", type=int)
    sp.add_argument("--types", type=int)
    sp.add_argument("--actions", type=int)
    sp.add_argument("--sender", choices=("tensor", "anonymous"))
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("report", help="summarize a run or sweep directory")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("sweep", help="grid over horizons and seeds")
    common(sp)
    sp.add_argument("--horizons", type=int, nargs="+")
    sp.add_argument("--seeds", type=int, nargs="+")
    sp.add_argument("--n-seeds", type=int, default=4)
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InstanceValidationError, ParamError) as exc:
        print(f"instance error: {exc}", file=sys.stderr)
        return EXIT_INSTANCE
    except PersuasionError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
