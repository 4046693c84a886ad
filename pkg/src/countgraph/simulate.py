"""Synthetic count panels from a known ground-truth model.

The latent field starts from an exact stationary draw of the initial
block (Cholesky of the block covariance), runs the AR recursion forward,
and counts are Poisson at exp(z'beta + X). True graphs are extracted from
the generating parameters with near-zero thresholds, so quadratic
fill-in edges of the inverse spectral density count as ground truth for
the undirected graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import stationary_covariance
from .exceptions import DivergenceError, NonStationaryError
from .graphs import GraphResult, extract_graphs
from .likelihood import OVERFLOW_CAP, build_covariates, covariate_offsets
from .params import CountPanel, LatentSample, ModelParams, companion_matrix, spectral_radius
from .spectral import compute_W

__all__ = ["TruthSpec", "generate", "random_sparse_ar", "make_truth",
           "TRUE_RHO_STAR", "TRUE_CAUSALITY_TOL"]

# thresholds for truth graphs: anything numerically nonzero is an edge
TRUE_RHO_STAR = 1e-7
TRUE_CAUSALITY_TOL = 1e-8


@dataclass(frozen=True)
class TruthSpec:
    """Ground-truth model plus the sampling design that produced it."""

    params: ModelParams
    N: int
    seed: int = 0
    sparsity: float = 0.15
    magnitude: float = 0.3
    covariates: np.ndarray | None = None  # (N, q); default built from q

    def __post_init__(self):
        if not 0.0 <= self.sparsity <= 1.0:
            raise ValueError("sparsity must be in [0, 1]")
        if self.N < 2 * self.params.p + 1:
            raise ValueError("N must be >= 2p+1")


def _default_covariates(q: int, N: int) -> np.ndarray:
    if q == 4:
        return build_covariates("trend+seasonal", N)
    if q == 1:
        return np.ones((N, 1))
    raise ValueError(f"no default covariate design for q={q}; pass covariates")


def random_sparse_ar(n: int, p: int, sparsity: float, magnitude: float,
                     seed: int = 0):
    """Draw sparse AR matrices: each entry is +-magnitude w.p. sparsity.

    Redraws (up to 100 times) until the companion spectral radius is
    below 0.95. Returns (ar_coeffs, directed_edges, undirected_edges);
    directed edges are (i, j) for i -> j, undirected the index pairs with
    any nonzero off-diagonal in the W stack at Sigma = I.
    """
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError("sparsity must be in [0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(100):
        mask = rng.random((p, n, n)) < sparsity
        signs = np.where(rng.random((p, n, n)) < 0.5, -1.0, 1.0)
        a = magnitude * signs * mask
        rho = spectral_radius(companion_matrix(a)) if p else 0.0
        if rho < 0.95:
            break
    else:
        raise NonStationaryError(
            f"no stationary draw with sparsity={sparsity}, magnitude={magnitude} "
            f"after 100 tries (companion spectral radius kept >= 0.95)"
        )
    directed = set()
    if p:
        directed = {(i, j) for i in range(n) for j in range(n)
                    if i != j and np.max(np.abs(a[:, j, i])) > 0}
    undirected = set()
    if p:
        w = compute_W(ModelParams(np.zeros((1, n)), a, np.ones(n), validate=False))
        for i in range(n):
            for j in range(i + 1, n):
                if any(abs(mat[i, j]) > 1e-12 or abs(mat[j, i]) > 1e-12
                       for mat in w.mats):
                    undirected.add((i, j))
    return a, directed, undirected


def generate(spec: TruthSpec) -> tuple[CountPanel, LatentSample, GraphResult]:
    """Simulate (Y, X) from the truth and return the true graphs with them."""
    params = spec.params
    n, p, q, N = params.n, params.p, params.q, spec.N
    rng = np.random.Generator(np.random.PCG64(spec.seed))

    X = np.empty((n, N))
    if p:
        stat = stationary_covariance(params)
        L = np.linalg.cholesky(stat.fwd_block)
        x0 = L @ rng.standard_normal(n * p)
        X[:, :p] = x0.reshape(p, n).T
    for t in range(p, N):
        mean = np.zeros(n)
        for k in range(1, p + 1):
            mean += params.ar_coeffs[k - 1] @ X[:, t - k]
        X[:, t] = mean + params.sigma * rng.standard_normal(n)

    z = spec.covariates if spec.covariates is not None else _default_covariates(q, N)
    panel_probe = CountPanel(np.zeros((n, N), dtype=np.int64), z)
    logmu = covariate_offsets(panel_probe, params) + X
    if logmu.max() > OVERFLOW_CAP:
        raise DivergenceError(
            f"simulated log-mean {logmu.max():.1f} exceeds cap {OVERFLOW_CAP}"
        )
    counts = rng.poisson(np.exp(logmu))
    panel = CountPanel(counts.astype(np.int64), z)
    truth = extract_graphs(params, rho_star=TRUE_RHO_STAR, tol=TRUE_CAUSALITY_TOL)
    return panel, LatentSample(X), truth


def make_truth(n: int = 10, p: int = 2, N: int = 200, *,
               sparsity: float = 0.15, magnitude: float = 0.3,
               sigma: float = 0.1, seed: int = 0,
               beta_col=(0.5, 0.005, 0.5, 0.5)) -> TruthSpec:
    """Study-style truth: every series gets the same regression column
    against an intercept/trend/annual-harmonic design, sparse +-magnitude
    AR matrices, homogeneous noise scale."""
    a, _, _ = random_sparse_ar(n, p, sparsity, magnitude, seed=seed)
    beta = np.tile(np.asarray(beta_col, dtype=float)[:, None], (1, n))
    params = ModelParams(beta, a, np.full(n, float(sigma)))
    return TruthSpec(params=params, N=N, seed=seed,
                     sparsity=sparsity, magnitude=magnitude)
