"""Joint log-density of (Y, X) and covariate construction.

Convention used throughout the package: the Poisson log-factorial constant
-sum_{i,t} log(Y_i(t)!) is EXCLUDED from every likelihood value. It depends
only on the data, so no optimization, ranking, or information criterion is
affected; absolute likelihood magnitudes are comparable only within this
package.
"""

from __future__ import annotations

import numpy as np

from .covariance import StationaryCov, stationary_covariance
from .exceptions import DivergenceError
from .params import CountPanel, LatentSample, ModelParams

__all__ = [
    "OVERFLOW_CAP",
    "build_covariates",
    "conditional_mean",
    "covariate_offsets",
    "joint_log_density",
    "joint_log_density_samples",
]

_LOG_2PI = float(np.log(2.0 * np.pi))

# exp() arguments above this are treated as numerical divergence, not
# saturated; exp(700) is near the float64 ceiling
OVERFLOW_CAP = 700.0


def build_covariates(kind: str, N: int, period: float = 12.0) -> np.ndarray:
    """Intercept + linear trend + one seasonal harmonic design.

    Row t (t = 1..N) is [1, t, cos(2*pi*t/period), sin(2*pi*t/period)].
    """
    if kind != "trend+seasonal":
        raise ValueError(f"unknown covariate kind: {kind!r}")
    if N < 1:
        raise ValueError("N must be >= 1")
    if period <= 0:
        raise ValueError("period must be positive")
    t = np.arange(1, N + 1, dtype=float)
    ang = 2.0 * np.pi * t / period
    return np.column_stack([np.ones(N), t, np.cos(ang), np.sin(ang)])


def conditional_mean(z: np.ndarray, beta_i: np.ndarray, x: float,
                     cap: float = OVERFLOW_CAP) -> float:
    """mu_i(t) = exp(z'beta_i + x); raises on overflow past ``cap``."""
    log_mean = float(np.dot(np.asarray(z, dtype=float), np.asarray(beta_i, dtype=float)) + x)
    if log_mean > cap:
        raise DivergenceError(f"log-mean {log_mean:.3g} exceeds overflow cap {cap}")
    return float(np.exp(log_mean))


def covariate_offsets(panel: CountPanel, params: ModelParams) -> np.ndarray:
    """(n, N) matrix of z_{t,i}'beta_i."""
    return np.einsum("itq,qi->it", panel.covariates, params.beta)


def _poisson_part(counts, offsets, latent, cap):
    log_means = offsets + latent
    if np.max(log_means) > cap:
        raise DivergenceError(
            f"max log-mean {np.max(log_means):.3g} exceeds overflow cap {cap}"
        )
    return float(np.sum(counts * log_means - np.exp(log_means)))


def _ar_residuals(latent: np.ndarray, params: ModelParams) -> np.ndarray:
    """eps(t) = X(t) - sum_k A_k X(t-k) for t = p+1..N; shape (..., n, N-p)."""
    p = params.p
    resid = latent[..., :, p:].copy()
    N = latent.shape[-1]
    for k in range(p):
        resid -= np.einsum(
            "ab,...bt->...at", params.ar_coeffs[k], latent[..., :, p - k - 1 : N - k - 1]
        )
    return resid


def _initial_stack_fwd(latent: np.ndarray, p: int) -> np.ndarray:
    """[X(1); ...; X(p)] along the last axis; shape (..., n*p)."""
    parts = [latent[..., :, t] for t in range(p)]
    return np.concatenate(parts, axis=-1)


def joint_log_density(panel: CountPanel, latent, params: ModelParams,
                      stat: StationaryCov | None = None,
                      cap: float = OVERFLOW_CAP) -> float:
    """log P(Y, X | theta), log-factorial constant excluded.

    Three pieces: the Poisson kernel sum_{i,t} [X Y + z'beta Y - exp(X + z'beta)],
    the conditional Gaussian term for eps(t), t = p+1..N, and the Gaussian
    density of the stacked initial block X(1..p) under the stationary law.
    For p = 0 the density is the Poisson part plus iid N(0, Sigma) terms.
    """
    if isinstance(latent, LatentSample):
        latent = latent.values
    latent = np.asarray(latent, dtype=float)
    n, N = panel.counts.shape
    p = params.p
    offsets = covariate_offsets(panel, params)
    value = _poisson_part(panel.counts, offsets, latent, cap)

    resid = _ar_residuals(latent, params)
    scaled = resid / params.sigma[:, None]
    value += -0.5 * float(np.sum(scaled**2))
    value += -(N - p) * (0.5 * n * _LOG_2PI + float(np.sum(np.log(params.sigma))))

    if p > 0:
        if stat is None:
            stat = stationary_covariance(params)
        x0 = _initial_stack_fwd(latent, p)
        quad = float(x0 @ stat.fwd_precision @ x0)
        sign, logdet = np.linalg.slogdet(stat.fwd_block)
        value += -0.5 * (quad + logdet + n * p * _LOG_2PI)
    return value


def joint_log_density_samples(panel: CountPanel, samples: np.ndarray,
                              params: ModelParams,
                              stat: StationaryCov | None = None,
                              cap: float = OVERFLOW_CAP) -> np.ndarray:
    """Vectorized joint_log_density over a (m, n, N) stack of latent draws."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 2:
        samples = samples[None]
    m, n, N = samples.shape
    p = params.p
    offsets = covariate_offsets(panel, params)
    log_means = offsets[None] + samples
    if np.max(log_means) > cap:
        raise DivergenceError(
            f"max log-mean {np.max(log_means):.3g} exceeds overflow cap {cap}"
        )
    values = np.sum(panel.counts[None] * log_means - np.exp(log_means), axis=(1, 2))

    resid = _ar_residuals(samples, params)
    scaled = resid / params.sigma[None, :, None]
    values += -0.5 * np.sum(scaled**2, axis=(1, 2))
    values += -(N - p) * (0.5 * n * _LOG_2PI + float(np.sum(np.log(params.sigma))))

    if p > 0:
        if stat is None:
            stat = stationary_covariance(params)
        x0 = _initial_stack_fwd(samples, p)
        quad = np.einsum("ma,ab,mb->m", x0, stat.fwd_precision, x0)
        sign, logdet = np.linalg.slogdet(stat.fwd_block)
        values += -0.5 * (quad + logdet + n * p * _LOG_2PI)
    return values
