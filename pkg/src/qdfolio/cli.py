"""Command-line interface.

Subcommands: synth, estimate, frontier, fit-gamma, qd-run, metrics, sweep,
select, report. Exit codes: 0 success, 2 usage error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import analytics, estimation, mv, persistence
from .behavior import BehaviorDescriptor
from .core import Estimates, Portfolio, risk_return, sharpe
from .engine import QdConfig, run_qd
from .estimation import load_metadata_csv, load_returns_csv
from .persistence import RunManifest, load_archive, load_estimates, save_archive, save_estimates
from .selection import NoNearOptimalError, generate_synthetic_universe, select_portfolio

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError as e:
        raise ValueError(f"cannot parse vector {text!r}: {e}") from None


def _read_config_file(path) -> dict:
    """Flat key = value file (a TOML-compatible subset)."""
    out: dict = {}
    with open(path) as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: cannot parse line {raw.strip()!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key] = _coerce(val)
    return out


def _coerce(val: str):
    if val.startswith('"') and val.endswith('"'):
        return val[1:-1]
    low = val.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(val)
    except ValueError:
        pass
    try:
        return float(val)
    except ValueError:
        return val


def _load_universe(args):
    return load_metadata_csv(args.meta) if getattr(args, "meta", None) else None


def _resolve_w0(args, est: Estimates, cfg_file: dict | None = None) -> Portfolio:
    w0_text = getattr(args, "w0", None) or (cfg_file or {}).get("w0")
    gamma = getattr(args, "gamma", None)
    if gamma is None and cfg_file:
        gamma = cfg_file.get("gamma")
    use_max_sharpe = getattr(args, "max_sharpe", False) or bool((cfg_file or {}).get("max_sharpe"))
    given = sum([w0_text is not None, gamma is not None, use_max_sharpe])
    if given != 1:
        raise ValueError("specify exactly one of --w0, --gamma, --max-sharpe (flag or config key)")
    if w0_text is not None:
        return Portfolio(weights=_parse_vector(str(w0_text)))
    rf = getattr(args, "rf", None)
    if rf is None:
        rf = (cfg_file or {}).get("rf", 0.0)
    if use_max_sharpe:
        return mv.max_sharpe(est, rf=float(rf))
    return mv.solve_mv(float(gamma), est)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    win, universe = generate_synthetic_universe(args.assets, args.sectors, args.days, args.seed)
    estimation.save_returns_csv(args.out_returns, win, universe.names)
    estimation.save_metadata_csv(args.out_meta, universe)
    print(f"wrote {args.out_returns} ({win.n_days} days x {win.n_assets} assets) and {args.out_meta}")
    return EXIT_OK


def _cmd_estimate(args) -> int:
    win, names = load_returns_csv(args.returns)
    universe = _load_universe(args)
    settings = analytics.EstimatorSettings(
        mean_method=args.mean,
        cov_method=args.method,
        rf=args.rf,
        trading_days_per_year=args.trading_days,
        market_mode=args.market,
    )
    est = settings.estimate(win, universe)
    save_estimates(args.out, est, names)
    print(f"wrote {args.out} (N={est.n_assets}, mean={args.mean}, cov={args.method})")
    return EXIT_OK


def _cmd_frontier(args) -> int:
    est, names = load_estimates(args.est)
    pts = mv.efficient_frontier(est, args.points)
    cols = names or [f"w{i+1}" for i in range(est.n_assets)]
    with open(args.out, "w") as f:
        f.write("gamma,sigma,mu," + ",".join(cols) + "\n")
        for p in pts:
            ws = ",".join(repr(float(x)) for x in p.w.weights)
            f.write(f"{p.gamma!r},{p.rr.sigma!r},{p.rr.mu!r},{ws}\n")
    print(f"wrote {args.out} ({len(pts)} frontier points)")
    return EXIT_OK


def _cmd_fit_gamma(args) -> int:
    est, _ = load_estimates(args.est)
    target = Portfolio(weights=_parse_vector(args.target))
    gamma, w = mv.fit_gamma(est, target)
    err = float(np.max(np.abs(w.weights - target.weights)))
    print(json.dumps({"gamma": gamma, "weights": w.weights.tolist(), "max_abs_error": err}))
    return EXIT_OK


def _cmd_qd_run(args) -> int:
    cfg_file = _read_config_file(args.config) if args.config else {}
    est, _ = load_estimates(args.est)
    universe = _load_universe(args)
    overrides = {
        k: v
        for k, v in {
            "M": args.M,
            "n_max": args.n_max,
            "n_cvt": args.n_cvt,
            "p_init": args.p_init,
            "m": args.m,
            "c": args.c,
            "fitness": args.fitness,
            "behavior": args.behavior,
            "seed": args.seed,
            "rf": args.rf,
            "batch_size": args.batch,
        }.items()
        if v is not None
    }
    cfg = QdConfig.from_dict({**cfg_file, **overrides})
    w0 = _resolve_w0(args, est, cfg_file)
    t0 = time.perf_counter()
    archive = run_qd(cfg, est, universe, w0)
    wall = time.perf_counter() - t0
    est_sum = persistence.estimates_checksum(est)
    uni_sum = persistence.sha256_file(args.meta) if args.meta else None
    save_archive(args.out, archive, est_sum, uni_sum)
    if args.partition_out:
        archive.partition.save(args.partition_out)
    if args.snapshots:
        persistence.save_snapshots_csv(args.snapshots, archive.snapshots)
    metrics_path = None
    if args.metrics_out:
        analytics.compute_metrics(archive).save_json(args.metrics_out)
        metrics_path = args.metrics_out
    if args.manifest:
        RunManifest.fresh(cfg, est_sum, uni_sum, args.out, metrics_path, wall).save(args.manifest)
    cov = analytics.modified_coverage(archive)
    print(f"wrote {args.out}: {int(archive.occupied.sum())}/{cfg.M} niches, coverage {cov:.4f}, {wall:.1f}s")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    archive = load_archive(args.archive)
    report = analytics.compute_metrics(archive, rf=args.rf)
    if args.out:
        report.save_json(args.out)
    if args.csv:
        report.save_tidy_csv(args.csv)
    print(json.dumps({k: v for k, v in report.to_dict().items() if not k.startswith("ap")}))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    archive = load_archive(args.archive)
    win, _ = load_returns_csv(args.returns)
    universe = _load_universe(args)
    settings = analytics.EstimatorSettings(
        mean_method=args.mean,
        cov_method=args.method,
        rf=args.rf,
        trading_days_per_year=args.trading_days,
        market_mode=args.market,
    )
    t_grid = [int(t) for t in args.t_grid.split(",")]
    c_grid = [float(c) for c in args.c_grid.split(",")]
    cov = analytics.robustness_sweep(archive, win, t_grid, c_grid, settings, universe)
    analytics.save_sweep_csv(args.out, cov, t_grid, c_grid)
    print(f"wrote {args.out} ({len(t_grid)} x {len(c_grid)} coverage matrix)")
    return EXIT_OK


def _cmd_select(args) -> int:
    archive = load_archive(args.archive)
    bd = BehaviorDescriptor(values=_parse_vector(args.bd))
    w, niche = select_portfolio(archive, bd)
    rec = archive.record(niche)
    print(
        json.dumps(
            {
                "niche": niche,
                "weights": w.weights.tolist(),
                "mu": rec.rr.mu,
                "sigma": rec.rr.sigma,
                "fitness": rec.fitness,
                "near_optimal": rec.near_optimal,
            }
        )
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    archive = load_archive(args.archive)
    report = analytics.compute_metrics(archive)
    with open(args.out, "w") as f:
        f.write("curve,x,y\n")
        if args.snapshots:
            for s in persistence.load_snapshots_csv(args.snapshots):
                f.write(f"coverage_mod,{s.eval_count},{s.coverage_mod!r}\n")
                f.write(f"qd_score1,{s.eval_count},{s.qd_score1!r}\n")
                f.write(f"qd_score_mod,{s.eval_count},{s.qd_score_mod!r}\n")
        for t, p in report.ap1:
            f.write(f"ap1,{t!r},{p!r}\n")
        for t, p in report.ap2:
            f.write(f"ap2,{t!r},{p!r}\n")
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdfolio", description="Diverse near-optimal portfolios via quality-diversity search")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic returns dataset")
    sp.add_argument("--assets", type=int, required=True)
    sp.add_argument("--sectors", type=int, required=True)
    sp.add_argument("--days", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-returns", default="returns.csv")
    sp.add_argument("--out-meta", default="meta.csv")
    sp.set_defaults(func=_cmd_synth)

    sp = sub.add_parser("estimate", help="estimate annual moments from daily returns")
    sp.add_argument("--returns", required=True)
    sp.add_argument("--meta")
    sp.add_argument("--method", choices=["sample", "ledoit-wolf"], default="sample")
    sp.add_argument("--mean", choices=["sample", "capm"], default="sample")
    sp.add_argument("--market", choices=["equal", "cap"], default="equal")
    sp.add_argument("--rf", type=float, default=0.0)
    sp.add_argument("--trading-days", type=int, default=252)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_estimate)

    sp = sub.add_parser("frontier", help="efficient frontier CSV")
    sp.add_argument("--est", required=True)
    sp.add_argument("--points", type=int, default=100)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_frontier)

    sp = sub.add_parser("fit-gamma", help="fit risk aversion to target weights")
    sp.add_argument("--est", required=True)
    sp.add_argument("--target", required=True, help="comma-separated weights")
    sp.set_defaults(func=_cmd_fit_gamma)

    sp = sub.add_parser("qd-run", help="run the quality-diversity search")
    sp.add_argument("--config", help="flat key = value config file")
    sp.add_argument("--est", required=True)
    sp.add_argument("--meta")
    sp.add_argument("--w0", help="reference portfolio weights")
    sp.add_argument("--gamma", type=float, help="solve the reference portfolio at this risk aversion")
    sp.add_argument("--max-sharpe", action="store_true", help="use the maximum-Sharpe reference portfolio")
    sp.add_argument("--M", type=int)
    sp.add_argument("--n-max", dest="n_max", type=int)
    sp.add_argument("--n-cvt", dest="n_cvt", type=int)
    sp.add_argument("--p-init", dest="p_init", type=float)
    sp.add_argument("--m", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--fitness", choices=["F1", "F2"])
    sp.add_argument("--behavior", choices=["B1", "B2"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--rf", type=float)
    sp.add_argument("--batch", type=int, help="generation size (1 = strictly sequential)")
    sp.add_argument("--threads", type=int, default=1, help="reserved; evaluation is single-threaded")
    sp.add_argument("--out", required=True)
    sp.add_argument("--partition-out")
    sp.add_argument("--snapshots")
    sp.add_argument("--metrics-out")
    sp.add_argument("--manifest")
    sp.set_defaults(func=_cmd_qd_run)

    sp = sub.add_parser("metrics", help="metrics report for an archive")
    sp.add_argument("--archive", required=True)
    sp.add_argument("--rf", type=float, default=None)
    sp.add_argument("--out")
    sp.add_argument("--csv")
    sp.set_defaults(func=_cmd_metrics)

    sp = sub.add_parser("sweep", help="re-estimation robustness sweep")
    sp.add_argument("--archive", required=True)
    sp.add_argument("--returns", required=True)
    sp.add_argument("--meta")
    sp.add_argument("--t-grid", required=True, help="comma-separated window sizes")
    sp.add_argument("--c-grid", required=True, help="comma-separated thresholds (decimals)")
    sp.add_argument("--method", choices=["sample", "ledoit-wolf"], default="sample")
    sp.add_argument("--mean", choices=["sample", "capm"], default="sample")
    sp.add_argument("--market", choices=["equal", "cap"], default="equal")
    sp.add_argument("--rf", type=float, default=0.0)
    sp.add_argument("--trading-days", type=int, default=252)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("select", help="pick a near-optimal portfolio for a preferred descriptor")
    sp.add_argument("--archive", required=True)
    sp.add_argument("--bd", required=True, help="comma-separated behavior descriptor")
    sp.set_defaults(func=_cmd_select)

    sp = sub.add_parser("report", help="plot-ready trajectory and profile curves")
    sp.add_argument("--archive", required=True)
    sp.add_argument("--snapshots")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_report)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (mv.ConvergenceError, NoNearOptimalError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
