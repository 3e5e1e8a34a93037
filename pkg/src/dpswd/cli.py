"""Command-line experiments: compute, sensitivity, toy, calibrate, flow.

Every subcommand is a reproducible experiment: identical arguments and
seed produce identical output (the manifest's duration field is the only
exception, and worker count never affects results). JSON goes to stdout
with sorted keys; bulk data goes to CSV files under --out.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .accountant import (
    InfeasibleBudgetError,
    PrivacyBudget,
    calibrate_sigma,
    default_orders,
    dense_orders,
)
from .flow import FlowConfig, run_flow
from .measures import DataError, load_csv, normalize_for_privacy, save_csv
from .measures import EmpiricalMeasure
from .randomness import PURPOSE_DATA, derive_seed, substream
from .sensitivity import bernstein_bound, clt_bound, simulate_sensitivity, summarize_simulation
from .sliced_distance import SwdConfig, dp_swd, smoothed_swd, swd

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4


def _parse_seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be decimal or 0x-hex, got {text!r}")
    return value & ((1 << 64) - 1)


def _parse_grid(text: str) -> list[float]:
    """Inclusive start:stop:step grid, e.g. 0:1:0.1 -> 11 points."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric grid component in {text!r}")
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"grid must advance from start to stop, got {text!r}")
    count = int(round((stop - start) / step)) + 1
    return [start + i * step for i in range(count)]


def _parse_normalize(text: str) -> tuple[str, float | None]:
    if text == "max":
        return "max-norm", None
    if text.startswith("clip:"):
        try:
            radius = float(text.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad clip radius in {text!r}")
        return "clip", radius
    raise argparse.ArgumentTypeError(f"normalize must be 'max' or 'clip:C', got {text!r}")


def _manifest(subcommand: str, params: dict, seed: int, started: float) -> dict:
    return {
        "subcommand": subcommand,
        "params": params,
        "seed": seed,
        "version": __version__,
        "duration_s": round(time.perf_counter() - started, 6),
    }


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def cmd_compute(args) -> int:
    started = time.perf_counter()
    if args.sigma > 0 and args.normalize is None:
        raise argparse.ArgumentTypeError(
            "--sigma > 0 requires --normalize: the private mechanism assumes "
            "privacy-normalized inputs (row norms <= 1/2)"
        )
    a = load_csv(args.a, has_header=args.header)
    b = load_csv(args.b, has_header=args.header)
    if args.normalize is not None:
        mode, radius = args.normalize
        a = normalize_for_privacy(a, mode=mode, clip=radius)
        b = normalize_for_privacy(b, mode=mode, clip=radius)
    cfg = SwdConfig(k=args.k, q=args.q, seed=args.seed, sigma=args.sigma, noise_sides=args.sides)
    if args.sigma > 0:
        result = dp_swd(a, b, cfg, threads=args.threads)
    else:
        result = swd(a, b, cfg, threads=args.threads)
    params = {
        "a": str(args.a), "b": str(args.b), "k": args.k, "q": args.q,
        "sigma": args.sigma, "sides": args.sides,
        "normalize": args.normalize_raw, "header": args.header,
    }
    _emit(
        {
            "value": result.value,
            "distance": result.distance,
            "per_projection": [float(v) for v in result.per_projection],
            "config": {"k": cfg.k, "q": cfg.q, "sigma": cfg.sigma, "noise_sides": cfg.noise_sides, "seed": cfg.seed},
            "manifest": _manifest("compute", params, args.seed, started),
        }
    )
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    started = time.perf_counter()
    samples = simulate_sensitivity(args.d, args.k, args.trials, args.seed)
    summary = summarize_simulation(samples, args.k, args.d)
    requested = {
        "delta": args.delta,
        "empirical_quantile": float(np.quantile(samples, 1.0 - args.delta)),
        "bernstein": bernstein_bound(args.k, args.d, args.delta).w if args.d >= 2 else None,
        "clt": clt_bound(args.k, args.d, args.delta).w if args.d >= 2 else None,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sensitivity_samples.csv", ["trial", "h"],
               ((i, float(h)) for i, h in enumerate(samples)))
    params = {"d": args.d, "k": args.k, "trials": args.trials, "delta": args.delta, "out": str(args.out)}
    payload = {
        "empirical_mean": summary["empirical_mean"],
        "expected_mean": summary["expected_mean"],
        "requested": requested,
        "levels": summary["levels"],
        "manifest": _manifest("sensitivity", params, args.seed, started),
    }
    with open(out / "sensitivity_summary.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(payload)
    return EXIT_OK


def cmd_toy(args) -> int:
    started = time.perf_counter()
    grid = args.grid
    values_plain = np.empty((args.repeats, len(grid)))
    values_noised = np.empty((args.repeats, len(grid)))
    for r in range(args.repeats):
        data_rng = substream(args.seed, PURPOSE_DATA, r)
        base_source = data_rng.standard_normal((args.n, args.d))
        base_target = data_rng.standard_normal((args.n, args.d))
        rep_seed = derive_seed(args.seed, r)
        source = EmpiricalMeasure(base_source)
        for ci, c in enumerate(grid):
            target = EmpiricalMeasure(base_target + c)
            cfg0 = SwdConfig(k=args.k, q=2.0, seed=rep_seed, sigma=0.0)
            values_plain[r, ci] = swd(source, target, cfg0, threads=args.threads).value
            cfgs = SwdConfig(k=args.k, q=2.0, seed=rep_seed, sigma=args.sigma)
            values_noised[r, ci] = smoothed_swd(source, target, cfgs, threads=args.threads).value
    ddof = 1 if args.repeats > 1 else 0
    rows = []
    for ci, c in enumerate(grid):
        rows.append(
            {
                "c": c,
                "swd_mean": float(values_plain[:, ci].mean()),
                "swd_std": float(values_plain[:, ci].std(ddof=ddof)),
                "dpswd_mean": float(values_noised[:, ci].mean()),
                "dpswd_std": float(values_noised[:, ci].std(ddof=ddof)),
            }
        )
    params = {
        "d": args.d, "n": args.n, "k": args.k, "sigma": args.sigma,
        "grid": args.grid_raw, "repeats": args.repeats,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out / "toy.csv",
            ["c", "swd_mean", "swd_std", "dpswd_mean", "dpswd_std"],
            ([row[k] for k in ("c", "swd_mean", "swd_std", "dpswd_mean", "dpswd_std")] for row in rows),
        )
    _emit({"rows": rows, "manifest": _manifest("toy", params, args.seed, started)})
    return EXIT_OK


def cmd_calibrate(args) -> int:
    started = time.perf_counter()
    steps = args.epochs * (args.n // args.batch)
    if steps < 1:
        raise DataError(f"schedule has no steps: epochs={args.epochs}, n={args.n}, batch={args.batch}")
    gamma = args.batch / args.n
    budget = PrivacyBudget(
        eps_target=args.eps,
        delta_target=args.delta,
        steps=steps,
        sampling_rate=gamma,
        delta_split=args.delta_split,
    )
    delta_sens = budget.delta_sensitivity if args.delta_split > 0 else args.delta
    make = bernstein_bound if args.bound == "bernstein" else clt_bound
    bound = make(args.k, args.dim, delta_sens)
    orders = dense_orders() if args.orders == "dense" else default_orders()
    result = calibrate_sigma(budget, bound, orders=orders, amplification=args.amplification)
    params = {
        "eps": args.eps, "delta": args.delta, "dim": args.dim, "k": args.k,
        "n": args.n, "epochs": args.epochs, "batch": args.batch,
        "bound": args.bound, "amplification": args.amplification,
        "delta_split": args.delta_split, "orders": args.orders,
    }
    _emit(
        {
            "sigma": result.sigma,
            "eps_achieved": result.eps_achieved,
            "best_order": result.best_order,
            "w": bound.w,
            "bound_kind": bound.kind,
            "steps": steps,
            "gamma": gamma,
            "delta_split": args.delta_split,
            "amplification": args.amplification,
            "manifest": _manifest("calibrate", params, args.seed, started),
        }
    )
    return EXIT_OK


def cmd_flow(args) -> int:
    started = time.perf_counter()
    source = load_csv(args.source, has_header=args.header)
    target = load_csv(args.target, has_header=args.header)
    if args.sigma > 0 and args.normalize is None:
        raise argparse.ArgumentTypeError("--sigma > 0 requires --normalize (privacy precondition)")
    if args.normalize is not None:
        mode, radius = args.normalize
        source = normalize_for_privacy(source, mode=mode, clip=radius)
        target = normalize_for_privacy(target, mode=mode, clip=radius)
    cfg = FlowConfig(
        iterations=args.iters,
        learning_rate=args.lr,
        k=args.k,
        sigma=args.sigma,
        seed=args.seed,
        log_every=args.log_every,
        batch_size=args.batch,
        delta=args.delta,
        delta_split=args.delta_split,
        bound_kind=args.bound,
    )
    trace = run_flow(source, target, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "trace.csv",
        ["iteration", "loss", "grad_norm"],
        zip((int(i) for i in trace.iterations), (float(v) for v in trace.losses),
            (float(g) for g in trace.grad_norms)),
    )
    save_csv(EmpiricalMeasure(trace.final_points), out / "particles.csv")
    params = {
        "source": str(args.source), "target": str(args.target),
        "iters": args.iters, "lr": args.lr, "k": args.k, "sigma": args.sigma,
        "normalize": args.normalize_raw, "batch": args.batch,
        "delta": args.delta, "delta_split": args.delta_split, "bound": args.bound,
        "log_every": args.log_every, "out": str(args.out), "header": args.header,
    }
    _emit(
        {
            "final_loss": float(trace.losses[-1]),
            "final_grad_norm": float(trace.grad_norms[-1]),
            "logged_steps": int(trace.iterations.size),
            "eps": trace.eps,
            "delta": trace.delta,
            "best_order": trace.best_order,
            "sensitivity_w": trace.sensitivity.w if trace.sensitivity else None,
            "manifest": _manifest("flow", params, args.seed, started),
        }
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpswd",
        description="Differentially private sliced Wasserstein distance experiments",
    )
    parser.add_argument("--version", action="version", version=f"dpswd {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_parse_seed, default=0, help="decimal or 0x-hex master seed")
    common.add_argument("--threads", type=int, default=1, help="worker cap; never changes results")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("compute", parents=[common], help="SWD / DP-SWD between two CSV datasets")
    p.add_argument("--a", required=True, help="first (public) dataset CSV")
    p.add_argument("--b", required=True, help="second (private) dataset CSV")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--sides", choices=["both", "target-only"], default="both")
    p.add_argument("--normalize", type=_parse_normalize, default=None, metavar="max|clip:C")
    p.add_argument("--header", action="store_true", help="skip one header line in the CSVs")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("sensitivity", parents=[common], help="simulate the squared sensitivity")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("toy", parents=[common], help="two-Gaussian separation sweep")
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--grid", type=_parse_grid, default=_parse_grid("0:1:0.1"), metavar="START:STOP:STEP")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", default=None, help="optional output directory for toy.csv")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("calibrate", parents=[common], help="noise level for an (eps, delta) budget")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--bound", choices=["bernstein", "clt"], default="bernstein")
    p.add_argument(
        "--amplification", choices=["subsample", "poisson", "none"], default="subsample",
        help="subsampling bound: without-replacement (default), Poisson, or none",
    )
    p.add_argument("--delta-split", type=float, default=0.5, dest="delta_split")
    p.add_argument("--orders", choices=["default", "dense"], default="default")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("flow", parents=[common], help="particle descent toward a private target")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--normalize", type=_parse_normalize, default=None, metavar="max|clip:C")
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--delta-split", type=float, default=0.5, dest="delta_split")
    p.add_argument("--bound", choices=["bernstein", "clt"], default="bernstein")
    p.add_argument("--log-every", type=int, default=10, dest="log_every")
    p.add_argument("--header", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_flow)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.normalize_raw = None
    for raw_flag in ("normalize",):
        if hasattr(args, raw_flag) and getattr(args, raw_flag) is not None:
            mode, radius = getattr(args, raw_flag)
            args.normalize_raw = mode if radius is None else f"{mode}:{radius}"
    if hasattr(args, "grid"):
        g = args.grid
        args.grid_raw = f"{g[0]}:{g[-1]}:{g[1] - g[0] if len(g) > 1 else 0}"
    try:
        return args.func(args)
    except InfeasibleBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
