"""Command-line front end: dataset generation, fitting, and sweep grids.

Exit codes: 0 success, 2 parameter error, 3 data error, 4 convergence
failure.  All commands are deterministic given their flags, including
``sweep --parallel`` (rows are sorted before writing).  MEMNET_THREADS
caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import data as data_mod
from .bounds import verify_weight_bound
from .constructive import baum_relu_fit, baum_threshold_fit, exact_fit_generic
from .errors import (ConvergenceError, DataError, MemnetError, ParameterError)
from .harmonic import harmonic_fit
from .network import FitTrace, evaluate, total_weight
from .ntk import ntk_fit

EXACT_METHODS = {"exact", "baum-threshold", "baum-relu"}
ITER_METHODS = {"ntk", "harmonic"}
METHODS = EXACT_METHODS | ITER_METHODS


def _load_any(path: str) -> data_mod.Dataset:
    if path.endswith(".csv"):
        return data_mod.load_csv(path)
    return data_mod.load_dataset(path)


def _make_labels(ds, kind: str, seed: int):
    if kind == "rademacher":
        return data_mod.rademacher_labels(ds, seed)
    if kind == "gaussian":
        return data_mod.gaussian_labels(ds, seed)
    raise ParameterError(f"unknown label kind {kind!r}")


def cmd_gen_data(args) -> int:
    ds = data_mod.sample_sphere(args.n, args.d, args.seed)
    ds = _make_labels(ds, args.labels, args.seed + 1)
    data_mod.save_dataset(ds, args.output, label_kind=args.labels)
    rep = data_mod.genericity(ds)
    print(json.dumps({
        "n": ds.n, "d": ds.d, "output": args.output,
        "gamma": rep.gamma, "omega": rep.omega,
        "min_norm": rep.min_norm, "general_position": rep.general_position,
    }, indent=2))
    return 0


def _run_method(method: str, ds, epsilon, seed: int):
    """Returns (network, trace, extras)."""
    if method == "exact":
        net = exact_fit_generic(ds, seed=seed)
        return net, FitTrace(), {}
    if method == "baum-threshold":
        net = baum_threshold_fit(ds, seed=seed)
        return net, FitTrace(), {}
    if method == "baum-relu":
        net = baum_relu_fit(ds, seed=seed)
        return net, FitTrace(), {"k_formula": 4 * math.ceil(ds.n / ds.d)}
    if method == "ntk":
        res = ntk_fit(ds, epsilon, seed=seed)
        return res.network, res.trace, {
            "kd_achieved": res.kd_achieved, "kd_bound": res.kd_bound,
            "kd_hypothesis_met": res.kd_achieved <= res.kd_bound,
            "gamma": res.report.gamma, "omega": res.report.omega,
        }
    if method == "harmonic":
        res = harmonic_fit(ds, epsilon, seed=seed)
        return res.network, res.trace, {
            "m": res.m, "gamma": res.gamma,
            "active_set_size": int(len(res.active_set)),
            "trimmed_out": ds.n - int(len(res.active_set)),
            "active_set_guarantee": ds.n - math.ceil(1.0 / res.gamma ** 2),
        }
    raise ParameterError(f"unknown method {method!r}")


def _summary(method: str, ds, net, trace, epsilon, extras: dict) -> dict:
    f = evaluate(net, ds)
    y = ds.labels
    y_sq = float(y @ y)
    ratio = float(np.sum((f - y) ** 2)) / y_sq if y_sq > 0 else 0.0
    rademacher = bool(np.all(np.abs(y) == 1.0))
    out = {
        "method": method, "n": ds.n, "d": ds.d, "epsilon": epsilon,
        "k": net.k, "total_weight": total_weight(net),
        "error_ratio": ratio,
        "weight_floor": math.sqrt(ds.n) / 8.0,
        "weight_floor_hypothesis_met": rademacher and ratio <= 0.5,
    }
    out.update(extras)
    return out


def cmd_fit(args) -> int:
    if args.method not in METHODS:
        raise ParameterError(f"unknown method {args.method!r}")
    if args.method in ITER_METHODS and args.epsilon is None:
        raise ParameterError(f"--epsilon is required for {args.method}")
    if args.method in EXACT_METHODS and args.epsilon is not None:
        raise ParameterError(f"--epsilon is forbidden for {args.method}")
    ds = _load_any(args.dataset)
    net, trace, extras = _run_method(args.method, ds, args.epsilon, args.seed)
    prefix = args.output or os.path.splitext(args.dataset)[0]
    with open(prefix + ".network.json", "w") as fh:
        fh.write(net.to_json())
    trace.to_csv(prefix + ".trace.csv")
    summary = _summary(args.method, ds, net, trace, args.epsilon, extras)
    with open(prefix + ".summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary, indent=2))
    return 0


def _sweep_cell(method, n, d, seed, epsilon, labels):
    ds = data_mod.sample_sphere(n, d, seed)
    ds = _make_labels(ds, labels, seed + 1)
    if method == "baum-threshold":
        ds = ds.with_labels((ds.labels > 0).astype(float))
    net, trace, extras = _run_method(method, ds, epsilon, seed)
    f = evaluate(net, ds)
    y_sq = float(ds.labels @ ds.labels)
    return {
        "method": method, "n": n, "d": d, "seed": seed,
        "epsilon": "" if epsilon is None else epsilon,
        "k": net.k, "total_weight": total_weight(net),
        "error_ratio": float(np.sum((f - ds.labels) ** 2)) / y_sq if y_sq else 0.0,
        "max_residual": float(np.max(np.abs(f - ds.labels))),
        "trimmed_out": extras.get("trimmed_out", 0),
    }


def cmd_sweep(args) -> int:
    if args.method not in METHODS:
        raise ParameterError(f"unknown method {args.method!r}")
    if not args.n_list:
        raise ParameterError("n-list must be nonempty")
    if args.method in ITER_METHODS and args.epsilon is None:
        raise ParameterError(f"--epsilon is required for {args.method}")
    cells = [(args.method, n, args.d, seed, args.epsilon, args.labels)
             for n in args.n_list for seed in args.seeds]
    if args.parallel:
        from concurrent.futures import ProcessPoolExecutor
        workers = int(os.environ.get("MEMNET_THREADS", os.cpu_count() or 1))
        with ProcessPoolExecutor(max_workers=max(1, workers)) as pool:
            rows = list(pool.map(_sweep_cell_star, cells))
    else:
        rows = [_sweep_cell(*cell) for cell in cells]
    rows.sort(key=lambda r: (r["method"], r["n"], r["d"], r["seed"]))
    cols = ["method", "n", "d", "seed", "epsilon", "k", "total_weight",
            "error_ratio", "max_residual", "trimmed_out"]
    with open(args.output, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.output}")
    return 0


def _sweep_cell_star(cell):
    return _sweep_cell(*cell)


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memnet")
    parser.add_argument("--config", help="JSON file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="sample sphere data and write a dataset file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--labels", default="rademacher", choices=["rademacher", "gaussian"])
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen_data)

    f = sub.add_parser("fit", help="fit a dataset file with one construction")
    f.add_argument("--method", required=True)
    f.add_argument("--epsilon", type=float)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("-o", "--output", help="output path prefix")
    f.add_argument("dataset")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("sweep", help="run a method x n x seed grid, emit CSV")
    s.add_argument("--method", required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--n-list", type=_int_list, required=True)
    s.add_argument("--seeds", type=_int_list, default=[0])
    s.add_argument("--epsilon", type=float)
    s.add_argument("--labels", default="rademacher", choices=["rademacher", "gaussian"])
    s.add_argument("--parallel", action="store_true")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config) as fh:
            for key, value in json.load(fh).items():
                if getattr(args, key, None) in (None, parser.get_default(key)):
                    setattr(args, key, value)
    try:
        return args.func(args)
    except ParameterError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except ConvergenceError as err:
        print(f"convergence failure: {err}", file=sys.stderr)
        return 4
    except MemnetError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
