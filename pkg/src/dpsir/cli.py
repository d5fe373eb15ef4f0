"""Command-line interface.

    dpsir simulate CONFIG.json [--csv OUT.csv] [--json OUT.json]
    dpsir fit DATA.csv --response y --method dp-sir [--k auto] ...
    dpsir slices DATA.csv --response y --H 10 ...
    dpsir tune DATA.csv --response y --candidates 2,4,6,8 ...
    dpsir report RAW.json [--csv OUT.csv] [--json OUT.json]

All outputs are JSON on stdout unless a path is given. The worker count of
``simulate`` can be overridden with the DPSIR_WORKERS environment variable.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .bench.harness import RunConfig, reaggregate, run_benchmark
from .bench.io import export_report, ingest_csv, load_report
from .errors import DpsirError, InvalidInput
from .lowdim import DpSirConfig, dpsir_fit, dpsir_init, init_sigmas
from .mechanisms import INFINITE, PrivacyBudget, merge_ledgers
from .sir import sir_fit
from .slicing import make_slices
from .sparse import (
    DpSsirConfig,
    dp_validate_sparsity,
    dpspca_fit,
    dpssir_fit,
    dpssir_init,
    sparse_init_sigmas,
)

FIT_METHODS = ("sir", "dp-ini", "dp-sir", "dp-sini", "dp-ssir", "dp-spca")


def _budget(args, n):
    """(epsilon, delta) from the flags; delta defaults to n^-1.1."""
    if args.epsilon is None or math.isinf(args.epsilon):
        return INFINITE
    return PrivacyBudget(args.epsilon, args.delta if args.delta is not None else n**-1.1)


def _k(text):
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("k must be 'auto' or a positive integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError("k must be positive")
    return value


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers") from None


def _load(args):
    return ingest_csv(args.data, args.response, standardize=args.standardize, labels=args.labels)


def _plan(args, data, rng):
    hist = PrivacyBudget(args.hist_epsilon) if args.hist_epsilon else INFINITE
    return make_slices(data.y, args.H, m=args.m, budget=hist, rng=rng)


def _estimate_json(est, data, plan):
    out = {
        "B_hat": est.B_hat.tolist(),
        "k": int(est.k_selected),
        "eigenvalues": [float(v) for v in np.asarray(est.eigenvalues)],
        "iterations": est.iterations_run,
        "ledger": est.ledger.to_dict(),
        "slices": plan.to_dict(),
    }
    if data.names is not None:
        out["names"] = list(data.names)
    if est.support is not None:
        out["support"] = [int(i) for i in est.support]
    return out


def _emit(obj, path):
    text = json.dumps(obj, indent=2, allow_nan=False, default=float)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def cmd_simulate(args):
    cfg = RunConfig.from_json(args.config)
    if args.workers:
        cfg.workers = args.workers
    report = run_benchmark(cfg)
    csv_path = args.csv or cfg.outputs.get("csv")
    json_path = args.json or cfg.outputs.get("json")
    if csv_path:
        export_report(report, "csv", csv_path)
    if json_path:
        export_report(report, "json", json_path)
    if not (csv_path or json_path):
        _emit(report.to_dict(), None)
    else:
        _print_rows(report.rows)
    return 0


def _print_rows(rows):
    for r in rows:
        loss = "nan" if r["mean_loss"] is None else f"{r['mean_loss']:.4f}"
        print(f"{r['model']:>6} ({r['n']},{r['p']}) {r['method']:<11} loss={loss} k={r['mean_k']} reps={r['reps']} fail={r['failures']}")


def cmd_fit(args):
    data = _load(args)
    rng = np.random.default_rng(args.seed)
    plan = _plan(args, data, rng)
    budget = _budget(args, data.n)
    m = args.method
    mult = args.noise_multiplier
    c_x = args.c_x or data.coord_bound
    common = dict(budget=budget, H=plan.H, c_x=c_x, r_multiplier=args.r_multiplier, noise_multiplier=mult)
    if m == "sir":
        if args.k == "auto":
            raise InvalidInput("sir needs an explicit --k")
        est = sir_fit(data, plan, args.k)
    elif m in ("dp-ini", "dp-sir"):
        s1, s2 = init_sigmas(data.p, data.n, c_x)
        est = dpsir_init(data, plan, args.k, budget, rng, sigma1=mult * s1, sigma2=mult * s2, c_x=c_x)
        if m == "dp-sir":
            cfg = DpSirConfig(**common)
            init = est
            est = dpsir_fit(data, cfg, init, rng, plan=plan)
            est.ledger = merge_ledgers(init.ledger, est.ledger)
    elif m in ("dp-sini", "dp-ssir"):
        s0, s1, s2 = sparse_init_sigmas(args.s_prime, data.n, c_x)
        est = dpssir_init(
            data, plan, args.k, args.s_prime, budget, rng,
            sigma=mult * s0, sigma1=mult * s1, sigma2=mult * s2, c_x=c_x,
        )
        if m == "dp-ssir":
            cfg = DpSsirConfig(s_prime=args.s_prime, **common)
            init = est
            est = dpssir_fit(data, cfg, init, rng, plan=plan)
            est.ledger = merge_ledgers(init.ledger, est.ledger)
    else:
        k = 1 if args.k == "auto" else args.k
        cfg = DpSsirConfig(k=k, s_prime=args.s_prime, **common)
        est = dpspca_fit(data, cfg, rng)
    _emit({"method": m, **_estimate_json(est, data, plan)}, args.out)
    return 0


def cmd_slices(args):
    data = _load(args)
    rng = np.random.default_rng(args.seed)
    plan = _plan(args, data, rng)
    out = plan.to_dict()
    if plan.histogram is not None:
        h = plan.histogram
        out["histogram"] = {
            "bin_edges": h.bin_edges.tolist(),
            "noised_counts": h.noised_counts.tolist(),
            "density": h.density.tolist(),
        }
    _emit(out, args.out)
    return 0


def cmd_tune(args):
    data = _load(args)
    rng = np.random.default_rng(args.seed)
    plan = _plan(args, data, rng)
    res = dp_validate_sparsity(
        data, plan, args.candidates, _budget(args, data.n), args.C_B, rng=rng, k=args.k_fixed,
        val_fraction=args.val_fraction, c_x=args.c_x,
    )
    _emit({
        "s_prime": res.s_prime,
        "candidates": args.candidates,
        "losses": res.losses.tolist(),
        "ledger": res.ledger.to_dict(),
    }, args.out)
    return 0


def cmd_report(args):
    raw = load_report(args.raw)
    if not raw.records:
        raise InvalidInput("the file holds no per-replication records")
    report = reaggregate(raw.metadata["config"], raw.records)
    if args.csv:
        export_report(report, "csv", args.csv)
    if args.json:
        export_report(report, "json", args.json)
    if not (args.csv or args.json):
        _print_rows(report.rows)
    return 0


def _data_args(p):
    p.add_argument("data", help="CSV file with a header row")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument("--labels", action="store_true", help="treat the response as categorical labels")
    p.add_argument("--standardize", action="store_true", help="scale covariates to mean 0, sd 1")
    p.add_argument("--H", type=int, default=10, help="number of slices")
    p.add_argument("--m", type=int, default=None, help="histogram bins (default ceil(n^(1/3)))")
    p.add_argument("--hist-epsilon", type=float, default=0.1, help="histogram epsilon (0 = exact)")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--c-x", type=float, default=None, help="public bound on |x_ij| (default: observed max)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")


def build_parser():
    ap = argparse.ArgumentParser(prog="dpsir", description="Differentially private sliced inverse regression")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a benchmark config file")
    p.add_argument("config")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit an estimator to a CSV file")
    _data_args(p)
    p.add_argument("--method", choices=FIT_METHODS, default="dp-sir")
    p.add_argument("--k", type=_k, default="auto")
    p.add_argument("--s-prime", type=int, default=6)
    p.add_argument("--r-multiplier", type=float, default=1.0, help="scale of the projection radius R")
    p.add_argument("--noise-multiplier", type=float, default=1.0,
                   help="scale every calibrated noise sd (values below 1 weaken the stated guarantee)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("slices", help="private histogram and slice cutoffs")
    _data_args(p)
    p.set_defaults(func=cmd_slices)

    p = sub.add_parser("tune", help="choose the peeling sparsity by private validation")
    _data_args(p)
    p.add_argument("--candidates", type=_int_list, required=True)
    p.add_argument("--C-B", dest="C_B", type=float, default=2.0)
    p.add_argument("--k", dest="k_fixed", type=int, default=1)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("report", help="re-aggregate raw per-replication records")
    p.add_argument("raw", help="JSON report written by simulate")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DpsirError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
