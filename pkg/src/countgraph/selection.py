"""Regularization sweep and information-criterion model selection.

A sweep fits the model along an ascending gamma grid, warm-starting each
fit from the previous solution, and scores every point with BIC/AICc
computed from a fresh Monte Carlo likelihood estimate at the fitted
parameters. Effective parameter count treats AR entries below the
causality tolerance as zeros, so the score and the extracted graph agree
on sparsity. Order selection runs the same scoring across candidate AR
orders at gamma = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from concurrent.futures import ThreadPoolExecutor

from .covariance import stationary_covariance
from .exceptions import NumericalError
from .graphs import DEFAULT_CAUSALITY_TOL, DEFAULT_RHO_STAR, GraphResult, extract_graphs
from .likelihood import joint_log_density_samples
from .mcem import FitConfig, FitTrace, run_mcem
from .mstep import _sample_array, initial_params, penalty_h1
from .params import CountPanel, ModelParams
from .sampler import ChainConfig, sample_latent
from .spectral import compute_W

__all__ = [
    "SweepPoint",
    "SelectionReport",
    "effective_k",
    "information_scores",
    "tradeoff_sweep",
    "select_gamma",
    "select_order",
    "auto_gamma_grid",
]


@dataclass
class SweepPoint:
    """One fitted point of the trade-off curve (or one candidate order)."""

    gamma: float
    params: ModelParams | None = None
    loglik_mc: float = math.nan
    penalty: float = math.nan
    bic: float = math.nan
    aicc: float = math.nan
    graph: GraphResult | None = None
    order: int | None = None
    trace: FitTrace | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and math.isfinite(self.bic)


@dataclass
class SelectionReport:
    chosen_gamma: float | None
    chosen_order: int | None
    points: list[SweepPoint]
    rationale: str

    @property
    def chosen(self) -> SweepPoint:
        for pt in self.points:
            if self.chosen_gamma is not None and pt.ok and pt.gamma == self.chosen_gamma:
                return pt
            if self.chosen_order is not None and pt.ok and pt.order == self.chosen_order:
                return pt
        raise LookupError("no chosen point in report")


def effective_k(params: ModelParams, tol: float = DEFAULT_CAUSALITY_TOL) -> int:
    """beta and sigma entries always count; A entries only above tol."""
    return params.n * params.q + params.n + int(np.sum(np.abs(params.ar_coeffs) > tol))


def information_scores(panel: CountPanel, params: ModelParams, samples,
                       tol: float = DEFAULT_CAUSALITY_TOL) -> tuple[float, float]:
    """(AICc, BIC) from the MC-average joint log-likelihood at params.

    BIC = -2 lhat + k ln(nN); AICc = -2 lhat + 2k + 2k(k+1)/(nN - k - 1).
    AICc is NaN when nN <= k + 1 (correction denominator nonpositive).
    """
    stat = stationary_covariance(params) if params.p else None
    values = _sample_array(samples)
    lhat = float(joint_log_density_samples(panel, values, params, stat).mean())
    k = effective_k(params, tol)
    nN = panel.n * panel.N
    bic = -2.0 * lhat + k * math.log(nN)
    if nN <= k + 1:
        aicc = math.nan
    else:
        aicc = -2.0 * lhat + 2.0 * k + 2.0 * k * (k + 1.0) / (nN - k - 1.0)
    return aicc, bic


def _spawned_seeds(master: int, count: int) -> list[tuple[int, int]]:
    ss = np.random.SeedSequence(master)
    out = []
    for child in ss.spawn(count):
        a, b = child.generate_state(2, dtype=np.uint64)
        out.append((int(a), int(b)))
    return out


def _chain_with_seed(chain: ChainConfig, seed: int) -> ChainConfig:
    return ChainConfig(m=chain.m, burn_in=chain.burn_in, thin=chain.thin, seed=seed)


def _score_point(panel: CountPanel, fitted: ModelParams, eval_seed: int,
                 config: FitConfig, rho_star: float, tol: float) -> dict:
    eval_chain = _chain_with_seed(config.chain, eval_seed)
    res = sample_latent(panel, fitted, eval_chain, use_numba=config.use_numba)
    aicc, bic = information_scores(panel, fitted, res.values, tol)
    stat = stationary_covariance(fitted) if fitted.p else None
    ll = float(joint_log_density_samples(panel, res.values, fitted, stat).mean())
    graph = extract_graphs(fitted, rho_star=rho_star, tol=tol)
    return {"aicc": aicc, "bic": bic, "loglik": ll, "graph": graph}


def tradeoff_sweep(panel: CountPanel, base_config: FitConfig,
                   gammas, order: int | None = None,
                   params_init: ModelParams | None = None,
                   rho_star: float = DEFAULT_RHO_STAR,
                   tol: float = DEFAULT_CAUSALITY_TOL) -> list[SweepPoint]:
    """Fit one point per gamma, ascending, warm-starting from the last fit.

    Failed fits are recorded on their SweepPoint (error set, scores NaN)
    and the sweep continues from the last good parameters.
    """
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ValueError("gammas must be nonempty")
    if any(g < 0 for g in gammas):
        raise ValueError("gammas must be nonnegative")
    if sorted(gammas) != gammas:
        raise ValueError("gammas must be sorted ascending")
    if params_init is None:
        if order is None:
            raise ValueError("pass either order or params_init")
        params_init = initial_params(panel, order)
    panel.check_order(params_init.p)

    seeds = _spawned_seeds(base_config.chain.seed, len(gammas))
    points: list[SweepPoint] = []
    warm = params_init
    for j, g in enumerate(gammas):
        fit_seed, eval_seed = seeds[j]
        cfg = FitConfig(gamma=g, tol=base_config.tol, max_iter=base_config.max_iter,
                        chain=_chain_with_seed(base_config.chain, fit_seed),
                        optimizer=base_config.optimizer,
                        use_numba=base_config.use_numba,
                        divergence_patience=base_config.divergence_patience)
        pt = SweepPoint(gamma=g)
        try:
            fitted, trace = run_mcem(panel, warm, cfg)
            scores = _score_point(panel, fitted, eval_seed, cfg, rho_star, tol)
            pt.params = fitted
            pt.trace = trace
            pt.loglik_mc = scores["loglik"]
            pt.penalty = penalty_h1(compute_W(fitted))
            pt.bic = scores["bic"]
            pt.aicc = scores["aicc"]
            pt.graph = scores["graph"]
            warm = fitted
        except Exception as exc:  # record and move on; sweep must finish
            pt.error = f"{type(exc).__name__}: {exc}"
        points.append(pt)
    return points


def select_gamma(points: list[SweepPoint]) -> SelectionReport:
    """Minimum-BIC point; exact ties resolved toward larger gamma."""
    valid = [pt for pt in points if pt.ok]
    if not valid:
        raise NumericalError("no valid sweep points")
    best = min(valid, key=lambda pt: (pt.bic, -pt.gamma))
    ranked = sorted(valid, key=lambda pt: (pt.bic, -pt.gamma))
    lines = [f"gamma={pt.gamma:g}: BIC={pt.bic:.2f}" for pt in ranked]
    rationale = (f"selected gamma={best.gamma:g} with BIC={best.bic:.2f} "
                 f"(minimum of {len(valid)} valid points; ties go to larger gamma)\n"
                 + "\n".join(lines))
    return SelectionReport(chosen_gamma=best.gamma, chosen_order=None,
                           points=list(points), rationale=rationale)


def select_order(panel: CountPanel, orders, config: FitConfig,
                 workers: int = 1) -> SelectionReport:
    """Fit each candidate AR order unpenalized and rank by BIC.

    AICc is reported alongside; when the two criteria disagree the
    rationale says so and BIC decides. Candidates are independent jobs
    with seeds spawned from the master seed, so ``workers > 1`` changes
    wall time only, never the report.
    """
    orders = [int(o) for o in orders]
    if not orders:
        raise ValueError("orders must be nonempty")
    if any(o < 0 for o in orders):
        raise ValueError("orders must be >= 0")

    seeds = _spawned_seeds(config.chain.seed, len(orders))

    def fit_one(j: int) -> SweepPoint:
        p = orders[j]
        fit_seed, eval_seed = seeds[j]
        cfg = FitConfig(gamma=0.0, tol=config.tol, max_iter=config.max_iter,
                        chain=_chain_with_seed(config.chain, fit_seed),
                        optimizer=config.optimizer, use_numba=config.use_numba,
                        divergence_patience=config.divergence_patience)
        pt = SweepPoint(gamma=0.0, order=p)
        try:
            panel.check_order(p)
            fitted, trace = run_mcem(panel, initial_params(panel, p), cfg)
            scores = _score_point(panel, fitted, eval_seed, cfg,
                                  DEFAULT_RHO_STAR, DEFAULT_CAUSALITY_TOL)
            pt.params = fitted
            pt.trace = trace
            pt.loglik_mc = scores["loglik"]
            pt.penalty = penalty_h1(compute_W(fitted))
            pt.bic = scores["bic"]
            pt.aicc = scores["aicc"]
            pt.graph = scores["graph"]
        except Exception as exc:
            pt.error = f"{type(exc).__name__}: {exc}"
        return pt

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(fit_one, range(len(orders))))
    else:
        points = [fit_one(j) for j in range(len(orders))]

    valid = [pt for pt in points if pt.ok]
    if not valid:
        raise NumericalError("every candidate order failed to fit")
    best = min(valid, key=lambda pt: (pt.bic, pt.order))
    by_aicc = min((pt for pt in valid if math.isfinite(pt.aicc)),
                  key=lambda pt: (pt.aicc, pt.order), default=None)
    lines = [f"p={pt.order}: BIC={pt.bic:.2f}, AICc={pt.aicc:.2f}" for pt in valid]
    rationale = f"selected order p={best.order} by BIC\n" + "\n".join(lines)
    if by_aicc is not None and by_aicc.order != best.order:
        rationale += (f"\nAICc prefers p={by_aicc.order}; criteria disagree, "
                      "BIC decides")
    return SelectionReport(chosen_gamma=None, chosen_order=best.order,
                           points=points, rationale=rationale)


def auto_gamma_grid(panel: CountPanel, order: int, base_config: FitConfig,
                    n_points: int = 8, probe_gammas=None) -> list[float]:
    """Default gamma grid: {0} plus n_points log-spaced values spanning
    [0.01 gamma_max, gamma_max], gamma_max being the smallest probe value
    whose fitted undirected graph is empty (largest probe as fallback)."""
    if probe_gammas is None:
        probe_gammas = [0.1 * 2.0**k for k in range(9)]
    probe_cfg = FitConfig(gamma=0.0, tol=base_config.tol,
                          max_iter=min(base_config.max_iter, 10),
                          chain=base_config.chain, optimizer=base_config.optimizer,
                          use_numba=base_config.use_numba)
    points = tradeoff_sweep(panel, probe_cfg, sorted(probe_gammas), order=order)
    gamma_max = None
    for pt in points:
        if pt.ok and pt.graph is not None and not pt.graph.undirected:
            gamma_max = pt.gamma
            break
    if gamma_max is None:
        gamma_max = max(probe_gammas)
    lo, hi = math.log10(0.01 * gamma_max), math.log10(gamma_max)
    grid = [0.0] + [10.0**x for x in np.linspace(lo, hi, n_points)]
    return grid
