import math

import numpy as np
import pytest

from countgraph import (
    ChainConfig,
    CountPanel,
    FitConfig,
    ModelParams,
    NumericalError,
    SweepPoint,
    effective_k,
    information_scores,
    joint_log_density_samples,
    sample_latent,
    select_gamma,
    select_order,
    stationary_covariance,
    tradeoff_sweep,
)

# the published trade-off table for the weekly disease panel
TABLE_PAIRS = [
    (0.0, 12111.43), (0.1706, 10846.09), (0.5084, 10583.76),
    (0.6829, 10197.97), (0.7969, 10227.05), (0.9795, 10313.73),
    (1.1266, 10512.76), (1.5951, 10734.25), (2.0186, 10973.20),
    (2.2213, 11275.20), (2.6271, 11510.35), (3.35, 11811.79),
]


def _points(pairs):
    return [SweepPoint(gamma=g, bic=b) for g, b in pairs]


def test_select_gamma_on_published_curve():
    report = select_gamma(_points(TABLE_PAIRS))
    assert report.chosen_gamma == pytest.approx(0.6829)
    assert report.chosen.bic == pytest.approx(10197.97)
    assert "0.6829" in report.rationale


def test_select_gamma_simulation_style_curve():
    gammas = [0.0, 0.0698, 0.2911, 0.5857, 0.6872, 0.9963, 1.8527, 2.6891, 3.0]
    bics = [14.0 + 10.0 * (g - 0.2911) ** 2 for g in gammas]
    report = select_gamma([SweepPoint(gamma=g, bic=b) for g, b in zip(gammas, bics)])
    assert report.chosen_gamma == pytest.approx(0.2911)


def test_select_gamma_tie_goes_to_larger_gamma():
    report = select_gamma(_points([(0.1, 5.0), (0.9, 5.0), (0.5, 5.0)]))
    assert report.chosen_gamma == pytest.approx(0.9)


def test_select_gamma_invariant_to_point_order():
    pairs = list(TABLE_PAIRS)
    rng = np.random.default_rng(0)
    for _ in range(5):
        rng.shuffle(pairs)
        assert select_gamma(_points(pairs)).chosen_gamma == pytest.approx(0.6829)


def test_select_gamma_skips_failed_points():
    pts = _points([(0.0, 9.0), (1.0, 5.0)])
    pts.append(SweepPoint(gamma=2.0, bic=1.0, error="diverged"))
    pts.append(SweepPoint(gamma=3.0, bic=math.nan))
    assert select_gamma(pts).chosen_gamma == pytest.approx(1.0)
    with pytest.raises(NumericalError):
        select_gamma([SweepPoint(gamma=0.0, bic=math.nan)])


def test_effective_k_counting():
    beta = np.zeros((4, 3))
    a = np.zeros((2, 3, 3))
    a[0, 0, 0] = 0.5
    a[1, 2, 1] = 1e-9  # below tolerance, not a free parameter
    params = ModelParams(beta, a, np.ones(3))
    base = 3 * 4 + 3          # beta block plus sigmas
    assert effective_k(params) == base + 1
    assert effective_k(params, tol=1e-12) == base + 2
    # zeroing the surviving entry drops k by exactly one
    a2 = a.copy(); a2[0, 0, 0] = 0.0
    assert effective_k(ModelParams(beta, a2, np.ones(3))) == base


def _scored_panel(seed=0):
    rng = np.random.default_rng(seed)
    n, N = 2, 50
    panel = CountPanel(rng.poisson(3.0, size=(n, N)), np.ones((N, 1)))
    a = np.array([[[0.3, 0.0], [0.2, 0.25]]])
    params = ModelParams(np.full((1, n), 1.0), a, np.full(n, 0.8))
    res = sample_latent(panel, params, ChainConfig(m=40, burn_in=40, seed=1))
    return panel, params, res.values


def test_information_scores_formulas():
    panel, params, samples = _scored_panel()
    aicc, bic = information_scores(panel, params, samples)
    stat = stationary_covariance(params)
    lhat = float(joint_log_density_samples(panel, samples, params, stat).mean())
    k = effective_k(params)
    nN = panel.n * panel.N
    assert bic == pytest.approx(-2 * lhat + k * math.log(nN), rel=1e-12)
    assert aicc == pytest.approx(
        -2 * lhat + 2 * k + 2 * k * (k + 1) / (nN - k - 1), rel=1e-12)


def test_aicc_nan_when_sample_too_small():
    rng = np.random.default_rng(1)
    panel = CountPanel(rng.poisson(2.0, size=(2, 3)), np.ones((3, 6)))
    params = ModelParams(np.ones((6, 2)), np.zeros((0, 2, 2)), np.ones(2))
    samples = rng.normal(size=(4, 2, 3))
    aicc, bic = information_scores(panel, params, samples)  # k = 14 >= nN - 1
    assert math.isnan(aicc)
    assert math.isfinite(bic)


def test_information_scores_relabel_invariant():
    panel, params, samples = _scored_panel()
    perm = np.array([1, 0])
    panel2 = CountPanel(panel.counts[perm], panel.covariates[perm])
    params2 = ModelParams(params.beta[:, perm],
                          params.ar_coeffs[:, perm][:, :, perm],
                          params.sigma[perm])
    scores1 = information_scores(panel, params, samples)
    scores2 = information_scores(panel2, params2, samples[:, perm])
    assert scores1 == pytest.approx(scores2, rel=1e-12)


def test_tradeoff_sweep_requires_start():
    panel, _, _ = _scored_panel()
    with pytest.raises(ValueError, match="order or params_init"):
        tradeoff_sweep(panel, FitConfig(), [0.0, 0.5])


def test_tradeoff_sweep_small_panel():
    panel, _, _ = _scored_panel(seed=3)
    config = FitConfig(tol=5e-3, max_iter=4, chain=ChainConfig(m=30, burn_in=30, seed=4))
    gammas = [0.0, 0.5, 2.0]
    points = tradeoff_sweep(panel, config, gammas, order=1)
    assert [pt.gamma for pt in points] == gammas
    assert all(pt.ok for pt in points)
    # penalty can only move down along the warm-started ascending grid
    pens = [pt.penalty for pt in points]
    assert pens[-1] <= pens[0] + 1e-9
    report = select_gamma(points)
    assert report.chosen in points


def test_select_order_recovers_independence():
    # iid Poisson panel with no dynamics: order 0 must win
    rng = np.random.default_rng(5)
    panel = CountPanel(rng.poisson(4.0, size=(2, 80)), np.ones((80, 1)))
    config = FitConfig(tol=1e-3, max_iter=6, chain=ChainConfig(m=40, burn_in=40, seed=6))
    report = select_order(panel, [0, 1], config)
    assert report.chosen_order == 0
    assert report.chosen.order == 0
    assert len(report.points) == 2


def test_select_order_workers_reproducible():
    rng = np.random.default_rng(6)
    panel = CountPanel(rng.poisson(3.0, size=(2, 60)), np.ones((60, 1)))
    config = FitConfig(tol=1e-3, max_iter=3, chain=ChainConfig(m=25, burn_in=25, seed=8))
    seq = select_order(panel, [0, 1, 2], config, workers=1)
    par = select_order(panel, [0, 1, 2], config, workers=3)
    assert seq.chosen_order == par.chosen_order
    for a, b in zip(seq.points, par.points):
        assert a.bic == pytest.approx(b.bic, rel=1e-12)
