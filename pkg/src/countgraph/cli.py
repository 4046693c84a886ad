"""Command-line pipelines: simulate | fit | sweep | order-select | graph-export.

Exit codes: 0 success, 2 input or configuration error, 3 numerical
failure (partial outputs are still written where possible).
"""

from __future__ import annotations

import argparse
import os
import re
import sys

from .exceptions import CountgraphError, FitDivergedError
from .graphs import DEFAULT_CAUSALITY_TOL, DEFAULT_RHO_STAR, extract_graphs
from .io import (
    read_counts_csv,
    read_covariates_csv,
    read_params_json,
    write_counts_csv,
    write_covariates_csv,
    write_curve_csv,
    write_graph_files,
    write_manifest,
    write_order_table_csv,
    write_params_json,
    write_report_json,
    write_rho_csv,
    write_sweep_csv,
    write_trace_csv,
    write_weights_csv,
)
from .likelihood import build_covariates
from .mcem import FitConfig, run_mcem
from .mstep import initial_params
from .params import CountPanel
from .sampler import ChainConfig
from .selection import auto_gamma_grid, select_gamma, select_order, tradeoff_sweep
from .simulate import TruthSpec, generate, make_truth
from .spectral import partial_coherence


def _int_list(text: str) -> list[int]:
    items = [x for x in re.split(r"[,\s]+", text.strip()) if x]
    if not items:
        raise ValueError("empty list")
    return [int(x) for x in items]


def _float_list(text: str) -> list[float]:
    items = [x for x in re.split(r"[,\s]+", text.strip()) if x]
    if not items:
        raise ValueError("empty list")
    return [float(x) for x in items]


def _add_common_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master RNG seed (PCG64)")


def _add_graph_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho-star", type=float, default=DEFAULT_RHO_STAR,
                   help="partial-coherence edge threshold")
    p.add_argument("--tol", type=float, default=DEFAULT_CAUSALITY_TOL,
                   help="AR-coefficient zero tolerance (directed edges and "
                        "effective parameter counting)")
    p.add_argument("--omega-grid", type=int, default=512,
                   help="frequency grid size for the coherence sup")


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--counts", required=True, help="counts CSV (header of "
                   "series labels, one row per time step)")
    p.add_argument("--covariates", default=None,
                   help="covariates CSV (N rows x q cols); default: "
                        "intercept/trend/seasonal design")
    p.add_argument("--period", type=float, default=52.0,
                   help="seasonal period of the synthesized covariate design")
    p.add_argument("--order", type=int, default=1, help="AR order p")
    p.add_argument("--samples", type=int, default=200,
                   help="retained MH samples per E-step")
    p.add_argument("--burn-in", type=int, default=200, help="discarded sweeps")
    p.add_argument("--thin", type=int, default=1, help="keep every thin-th sweep")
    p.add_argument("--max-iter", type=int, default=100, help="EM iteration cap")
    p.add_argument("--em-tol", type=float, default=1e-3,
                   help="relative parameter-change stopping threshold")
    p.add_argument("--normalized", action="store_true",
                   help="also export per-series max-normalized counts")
    _add_graph_flags(p)


def _load_panel(args) -> CountPanel:
    counts, labels = read_counts_csv(args.counts)
    if args.covariates:
        z = read_covariates_csv(args.covariates)
        if z.shape[0] != counts.shape[1]:
            raise ValueError(
                f"covariates rows ({z.shape[0]}) != time steps ({counts.shape[1]})"
            )
    else:
        z = build_covariates("trend+seasonal", counts.shape[1], period=args.period)
    return CountPanel(counts, z, series_labels=labels)


def _fit_config(args, gamma: float, seed: int | None = None) -> FitConfig:
    chain = ChainConfig(m=args.samples, burn_in=args.burn_in, thin=args.thin,
                        seed=args.seed if seed is None else seed)
    return FitConfig(gamma=gamma, tol=args.em_tol, max_iter=args.max_iter,
                     chain=chain)


def _write_model_outputs(outdir: str, panel: CountPanel, params, trace,
                         args) -> None:
    os.makedirs(outdir, exist_ok=True)
    write_params_json(os.path.join(outdir, "params.json"), params,
                      labels=panel.series_labels)
    if trace is not None:
        write_trace_csv(os.path.join(outdir, "trace.csv"), trace)
    field = partial_coherence(params, grid_size=args.omega_grid)
    graph = extract_graphs(params, rho_star=args.rho_star, tol=args.tol,
                           labels=panel.series_labels, field=field)
    write_graph_files(outdir, graph)
    write_rho_csv(os.path.join(outdir, "rho.csv"), panel.series_labels, field.rho)
    write_weights_csv(os.path.join(outdir, "weights.csv"), panel.series_labels,
                      graph.in_weight, graph.out_weight)
    if getattr(args, "normalized", False):
        write_counts_csv(os.path.join(outdir, "counts_normalized.csv"), panel,
                         normalized=True)


def _manifest_args(args) -> dict:
    d = {k: v for k, v in vars(args).items() if k != "func"}
    return d


def cmd_simulate(args) -> int:
    spec0 = make_truth(n=args.n, p=args.order, N=args.length,
                       sparsity=args.sparsity, magnitude=args.magnitude,
                       sigma=args.sigma, seed=args.seed)
    z = build_covariates("trend+seasonal", args.length, period=args.period)
    spec = TruthSpec(params=spec0.params, N=args.length, seed=args.seed,
                     sparsity=args.sparsity, magnitude=args.magnitude,
                     covariates=z)
    panel, latent, truth = generate(spec)
    truth = extract_graphs(spec.params, rho_star=1e-7, tol=1e-8,
                           labels=panel.series_labels)
    os.makedirs(args.out, exist_ok=True)
    write_counts_csv(os.path.join(args.out, "counts.csv"), panel)
    if args.normalized:
        write_counts_csv(os.path.join(args.out, "counts_normalized.csv"),
                         panel, normalized=True)
    write_covariates_csv(os.path.join(args.out, "covariates.csv"),
                         panel.covariates[0])
    write_params_json(os.path.join(args.out, "params.json"), spec.params,
                      labels=panel.series_labels)
    write_graph_files(args.out, truth)
    write_manifest(args.out, "simulate", _manifest_args(args))
    print(f"simulated {panel.n} series x {panel.N} steps -> {args.out}")
    return 0


def cmd_fit(args) -> int:
    panel = _load_panel(args)
    panel.check_order(args.order)
    config = _fit_config(args, args.gamma)
    params0 = initial_params(panel, args.order)
    os.makedirs(args.out, exist_ok=True)
    try:
        fitted, trace = run_mcem(panel, params0, config)
    except FitDivergedError as exc:
        if exc.trace is not None and len(exc.trace):
            write_trace_csv(os.path.join(args.out, "trace.csv"), exc.trace)
            last = exc.trace.iterations[-1].params
            write_params_json(os.path.join(args.out, "params.json"), last,
                              labels=panel.series_labels)
        write_manifest(args.out, "fit", _manifest_args(args))
        print(f"fit diverged: {exc}", file=sys.stderr)
        return 3
    _write_model_outputs(args.out, panel, fitted, trace, args)
    write_manifest(args.out, "fit", _manifest_args(args))
    print(f"fit converged={trace.converged} iterations={len(trace)} -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    panel = _load_panel(args)
    panel.check_order(args.order)
    base = _fit_config(args, 0.0)
    if args.gamma_grid.strip().lower() == "auto":
        gammas = auto_gamma_grid(panel, args.order, base)
    else:
        gammas = sorted(_float_list(args.gamma_grid))
    points = tradeoff_sweep(panel, base, gammas, order=args.order,
                            rho_star=args.rho_star, tol=args.tol)
    os.makedirs(args.out, exist_ok=True)
    write_sweep_csv(os.path.join(args.out, "sweep.csv"), points)
    write_curve_csv(os.path.join(args.out, "tradeoff_curve.csv"), points)
    valid = [pt for pt in points if pt.ok]
    if not valid:
        write_manifest(args.out, "sweep", _manifest_args(args))
        print("sweep produced no valid points", file=sys.stderr)
        return 3
    report = select_gamma(points)
    write_report_json(os.path.join(args.out, "selection.json"), report)
    chosen = report.chosen
    _write_model_outputs(args.out, panel, chosen.params, chosen.trace, args)
    write_manifest(args.out, "sweep", _manifest_args(args))
    print(f"swept {len(points)} gammas; chose gamma={report.chosen_gamma:g} "
          f"-> {args.out}")
    return 0


def cmd_order_select(args) -> int:
    panel = _load_panel(args)
    orders = _int_list(args.orders)
    config = _fit_config(args, 0.0)
    report = select_order(panel, orders, config, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    write_order_table_csv(os.path.join(args.out, "order_table.csv"),
                          report.points, report.chosen_order)
    write_report_json(os.path.join(args.out, "selection.json"), report)
    chosen = report.chosen
    _write_model_outputs(args.out, panel, chosen.params, chosen.trace, args)
    write_manifest(args.out, "order-select", _manifest_args(args))
    print(f"selected order p={report.chosen_order} -> {args.out}")
    return 0


def cmd_graph_export(args) -> int:
    params, labels = read_params_json(args.params)
    field = partial_coherence(params, grid_size=args.omega_grid)
    graph = extract_graphs(params, rho_star=args.rho_star, tol=args.tol,
                           labels=labels, field=field)
    os.makedirs(args.out, exist_ok=True)
    write_graph_files(args.out, graph)
    write_rho_csv(os.path.join(args.out, "rho.csv"), graph.labels, field.rho)
    write_weights_csv(os.path.join(args.out, "weights.csv"), graph.labels,
                      graph.in_weight, graph.out_weight)
    write_manifest(args.out, "graph-export", _manifest_args(args))
    print(f"exported graphs ({len(graph.undirected)} undirected, "
          f"{len(graph.directed)} directed edges) -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="countgraph",
        description="Graphical modeling of count time series via a latent "
                    "Gaussian AR field: simulate, fit by MCEM, sweep the "
                    "sparsity penalty, select AR order, export graphs.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="generate a synthetic panel from a "
                        "sparse ground-truth model")
    ps.add_argument("--n", type=int, default=10, help="number of series")
    ps.add_argument("--order", type=int, default=2, help="AR order p")
    ps.add_argument("--length", type=int, default=200, help="time steps N")
    ps.add_argument("--sparsity", type=float, default=0.15,
                    help="probability an AR entry is nonzero")
    ps.add_argument("--magnitude", type=float, default=0.3,
                    help="absolute value of nonzero AR entries")
    ps.add_argument("--sigma", type=float, default=0.1, help="noise scale")
    ps.add_argument("--period", type=float, default=12.0,
                    help="seasonal period of the covariate design")
    ps.add_argument("--normalized", action="store_true",
                    help="also export per-series max-normalized counts")
    _add_common_out(ps)
    ps.set_defaults(func=cmd_simulate)

    pf = sub.add_parser("fit", help="fit one penalized model and export graphs")
    _add_fit_flags(pf)
    pf.add_argument("--gamma", type=float, default=0.0, help="penalty weight")
    _add_common_out(pf)
    pf.set_defaults(func=cmd_fit)

    pw = sub.add_parser("sweep", help="fit along a gamma grid, pick the "
                        "BIC-minimal model")
    _add_fit_flags(pw)
    pw.add_argument("--gamma-grid", required=True,
                    help="comma-separated gammas, or 'auto'")
    pw.add_argument("--workers", type=int, default=1,
                    help="accepted for symmetry; sweep points run "
                         "sequentially to warm-start along the grid")
    _add_common_out(pw)
    pw.set_defaults(func=cmd_sweep)

    po = sub.add_parser("order-select", help="rank candidate AR orders by BIC")
    _add_fit_flags(po)
    po.add_argument("--orders", default="0,1,2,3",
                    help="comma-separated candidate orders")
    po.add_argument("--workers", type=int, default=1,
                    help="parallel candidate fits")
    _add_common_out(po)
    po.set_defaults(func=cmd_order_select)

    pg = sub.add_parser("graph-export", help="re-threshold and export graphs "
                        "from a fitted params JSON")
    pg.add_argument("--params", required=True, help="params JSON path")
    _add_graph_flags(pg)
    _add_common_out(pg)
    pg.set_defaults(func=cmd_graph_export)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except CountgraphError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
