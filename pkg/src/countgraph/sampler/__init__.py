"""Single-site Metropolis-Hastings sampler for the latent count-AR field.

Draws X | Y, theta by sweeping t = 1..N, i = 1..n. The proposal for site
(i, t) is the exact scalar conditional, under the Gaussian AR prior, of
component i of the time slice X(t) given every other currently held value.
The prior factor then cancels from the Hastings ratio and acceptance
reduces to the Poisson likelihood ratio at the single site.

Slice conditionals fall into 2p+1 structural cases: p initial times whose
prior couples through the stationary block covariance, one interior case,
and p tail times with truncated future coupling. The per-case precision K
and forcing matrices Phi are precomputed once per parameter value; see
``_proposal_tables``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..covariance import StationaryCov, stationary_covariance
from ..exceptions import NumericalError
from ..likelihood import OVERFLOW_CAP, covariate_offsets
from ..params import CountPanel, LatentSample, ModelParams
from ._kernel import get_kernel, numba_available, numba_enabled_by_default

__all__ = [
    "ChainConfig",
    "ProposalParams",
    "SampleResult",
    "proposal_params",
    "acceptance_log_ratio",
    "sample_latent",
    "initial_state",
    "numba_available",
    "numba_enabled_by_default",
]

# sites consumed per random-draw chunk; boundaries are a pure function of
# the problem size, so a fixed seed gives a bit-identical chain either way
CHUNK_DRAWS = 2_000_000


@dataclass(frozen=True)
class ChainConfig:
    """MCMC run lengths. m retained states, burn_in discarded sweeps,
    keep-every-thin sweeps afterwards."""

    m: int = 200
    burn_in: int = 200
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")


@dataclass(frozen=True)
class ProposalParams:
    """Gaussian proposal for one time slice: X(t) ~ N(mean, cov)."""

    mean: np.ndarray
    cov: np.ndarray
    regime: str  # "initial-block" | "interior" | "tail-block"


@dataclass
class SampleResult:
    """Retained draws (m, n, N), per-series acceptance rates, final chain state."""

    values: np.ndarray
    acceptance: np.ndarray
    final_state: np.ndarray

    @property
    def samples(self) -> list[LatentSample]:
        return [LatentSample(self.values[k]) for k in range(self.values.shape[0])]

    def __len__(self) -> int:
        return self.values.shape[0]


def _proposal_tables(params: ModelParams, stat: StationaryCov | None, N: int):
    """Precompute per-case slice-conditional precisions and forcing matrices.

    Returns (caseidx, K, Kinv, Phi):
      caseidx : (N,) int64, case index per 0-based time.
      K       : (ncase, n, n) conditional precision of X(t) | rest (prior).
      Kinv    : (ncase, n, n) its inverse = proposal covariance Sigma_t.
      Phi     : (ncase, 2p+1, n, n); conditional mean is
                Kinv @ sum_{d != 0} Phi[c, d+p] @ X(t+d).

    Case layout: 0..p-1 the initial times t = 1..p, case p the interior,
    cases p+1..2p the tail times t = N-p+1..N.
    """
    n, p = params.n, params.p
    if N < 2 * p + 1:
        raise ValueError(f"need N >= 2p+1 = {2 * p + 1}, got N = {N}")
    prec = 1.0 / params.sigma**2
    ncase = 2 * p + 1
    K = np.zeros((ncase, n, n))
    Phi = np.zeros((ncase, 2 * p + 1, n, n))
    a = params.ar_coeffs
    si_a = prec[:, None] * a if p else np.zeros((0, n, n))     # Sigma^-1 A_k
    aT_si = np.swapaxes(a, 1, 2) * prec[None, None, :] if p else si_a  # A_k' Sigma^-1

    # interior: precision Sigma^-1 + sum_k A_k' Sigma^-1 A_k; forcing pulls
    # in the p past slices, p future slices, and future-residual cross terms
    c = p
    K[c] = np.diag(prec)
    for k in range(1, p + 1):
        K[c] += aT_si[k - 1] @ a[k - 1]
        Phi[c, p - k] += si_a[k - 1]
        Phi[c, p + k] += aT_si[k - 1]
    for j in range(1, p + 1):
        for i in range(1, p + 1):
            if i != j:
                Phi[c, p + j - i] -= aT_si[j - 1] @ a[i - 1]

    # tail time t has only F = N - t future residuals; truncate those sums
    for r in range(p):
        c = p + 1 + r
        F = p - 1 - r
        K[c] = np.diag(prec)
        for i in range(1, p + 1):
            Phi[c, p - i] += si_a[i - 1]
        for j in range(1, F + 1):
            K[c] += aT_si[j - 1] @ a[j - 1]
            Phi[c, p + j] += aT_si[j - 1]
            for i in range(1, p + 1):
                if i != j:
                    Phi[c, p + j - i] -= aT_si[j - 1] @ a[i - 1]

    # initial time t <= p: the prior couples X(t) to the rest of the first
    # block through the stationary precision, plus residuals epsilon(t+k)
    # that exist once t+k > p, i.e. k >= p+1-t
    if p:
        if stat is None:
            raise ValueError("stat (StationaryCov) required when p >= 1")
        lam = stat.fwd_precision

        def lam_block(tb, ib):
            return lam[(tb - 1) * n : tb * n, (ib - 1) * n : ib * n]

        for t in range(1, p + 1):
            c = t - 1
            K[c] = lam_block(t, t).copy()
            for i in range(1, p + 1):
                if i != t:
                    Phi[c, p + i - t] -= lam_block(t, i)
            for k in range(p + 1 - t, p + 1):
                K[c] += aT_si[k - 1] @ a[k - 1]
                Phi[c, p + k] += aT_si[k - 1]
                for i in range(1, p + 1):
                    if i != k:
                        Phi[c, p + k - i] -= aT_si[k - 1] @ a[i - 1]

    Kinv = np.empty_like(K)
    for c in range(ncase):
        try:
            np.linalg.cholesky(K[c])
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"proposal covariance for case {c} is not positive definite"
            ) from exc
        Kinv[c] = np.linalg.inv(K[c])
        Kinv[c] = 0.5 * (Kinv[c] + Kinv[c].T)

    caseidx = np.full(N, p, dtype=np.int64)
    caseidx[:p] = np.arange(p)
    if p:
        caseidx[N - p :] = p + 1 + np.arange(p)
    return caseidx, K, Kinv, Phi


def _slice_mean(t0: int, X: np.ndarray, caseidx, Kinv, Phi, p: int) -> np.ndarray:
    N = X.shape[1]
    c = caseidx[t0]
    f = np.zeros(X.shape[0])
    for d in range(-p, p + 1):
        if d == 0 or not (0 <= t0 + d < N):
            continue
        f += Phi[c, d + p] @ X[:, t0 + d]
    return Kinv[c] @ f


def proposal_params(
    t: int,
    X: np.ndarray,
    params: ModelParams,
    stat: StationaryCov | None = None,
) -> ProposalParams:
    """Gaussian proposal N(mu_t, Sigma_t) for the time slice X(t), 1-based t.

    Regime 1 (t <= p) conditions through the stationary initial-block
    precision, regime 2 is the stationary interior formula, regime 3
    (t > N-p) truncates the future sums.
    """
    X = np.asarray(X, dtype=float)
    n, N = X.shape
    p = params.p
    if not 1 <= t <= N:
        raise ValueError(f"t must be in 1..{N}")
    if N < 2 * p + 1:
        raise ValueError(f"need N >= 2p+1 = {2 * p + 1}")
    if p and stat is None:
        stat = stationary_covariance(params)
    caseidx, K, Kinv, Phi = _proposal_tables(params, stat, N)
    t0 = t - 1
    mean = _slice_mean(t0, X, caseidx, Kinv, Phi, p)
    if t <= p:
        regime = "initial-block"
    elif t > N - p:
        regime = "tail-block"
    else:
        regime = "interior"
    return ProposalParams(mean=mean, cov=Kinv[caseidx[t0]].copy(), regime=regime)


def acceptance_log_ratio(x_new: float, x_cur: float, y: float, offset: float) -> float:
    """Log MH acceptance ratio for one site; prior terms cancel against the
    proposal, leaving the Poisson likelihood ratio
    (x_new - x_cur) y - e^offset (e^{x_new} - e^{x_cur}).

    Branches mirror the compiled kernel: a proposed log-mean past the
    overflow cap is rejected outright, and escaping an overflowed current
    state is always accepted.
    """
    a_new = offset + x_new
    a_cur = offset + x_cur
    if a_new > OVERFLOW_CAP:
        return -math.inf
    if a_cur > OVERFLOW_CAP:
        return math.inf
    return (x_new - x_cur) * y - (math.exp(a_new) - math.exp(a_cur))


def initial_state(panel: CountPanel, params: ModelParams) -> np.ndarray:
    """Moment-matched chain start: X ~ log Y - z'beta, clipped to [-10, 10]."""
    off = covariate_offsets(panel, params)
    return np.clip(np.log(panel.counts + 0.5) - off, -10.0, 10.0)


def sample_latent(
    panel: CountPanel,
    params: ModelParams,
    config: ChainConfig | None = None,
    stat: StationaryCov | None = None,
    x0: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    force_accept: bool = False,
    use_numba: bool | None = None,
) -> SampleResult:
    """Draw m latent matrices from P(X | Y, theta) by single-site MH.

    One retained sample per ``thin`` full sweeps after ``burn_in`` sweeps.
    Passing ``rng`` continues an existing stream (warm restarts); otherwise
    a fresh PCG64 generator is seeded from config.seed. Randomness is
    pre-drawn in fixed-size chunks, so results are reproducible and
    identical between the compiled and pure-python kernels.
    """
    if config is None:
        config = ChainConfig()
    n, N, p = panel.n, panel.N, params.p
    panel.check_order(p)
    if p and stat is None:
        stat = stationary_covariance(params)
    caseidx, K, Kinv, Phi = _proposal_tables(params, stat, N)

    off = np.ascontiguousarray(covariate_offsets(panel, params))
    Yf = np.ascontiguousarray(panel.counts, dtype=np.float64)
    X = np.ascontiguousarray(x0 if x0 is not None else initial_state(panel, params),
                             dtype=np.float64).copy()
    if X.shape != (n, N):
        raise ValueError(f"x0 must have shape {(n, N)}")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(config.seed))

    total_sweeps = config.burn_in + config.m * config.thin
    sites_per_sweep = n * N
    sweeps_per_chunk = max(1, CHUNK_DRAWS // sites_per_sweep)

    out = np.empty((config.m, n, N))
    acc = np.zeros(n, dtype=np.int64)
    kernel = get_kernel(use_numba)

    done = 0
    while done < total_sweeps:
        todo = min(sweeps_per_chunk, total_sweeps - done)
        record_slot = np.full(todo, -1, dtype=np.int64)
        for s in range(todo):
            k = done + s - config.burn_in
            if k >= 0 and (k + 1) % config.thin == 0:
                record_slot[s] = (k + 1) // config.thin - 1
        draws = todo * sites_per_sweep
        normals = rng.standard_normal(draws)
        unifs = rng.random(draws)
        kernel(X, Yf, off, caseidx, K, Kinv, Phi, p, todo,
               record_slot, normals, unifs, out, acc, force_accept)
        done += todo

    rate = acc / float(total_sweeps * N)
    return SampleResult(values=out, acceptance=rate, final_state=X)
