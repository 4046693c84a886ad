"""Model parameters, observed-data containers, and validation.

The model: counts Y_i(t) are conditionally Poisson with log-mean
z_{t,i}'beta_i + X_i(t), where X(t) is an n-variate Gaussian AR(p) process
X(t) = sum_k A_k X(t-k) + eps(t), eps(t) ~ N(0, diag(sigma_i^2)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "CountPanel",
    "LatentSample",
    "ValidationReport",
    "validate_params",
    "companion_matrix",
    "spectral_radius",
]


def companion_matrix(ar_coeffs: np.ndarray) -> np.ndarray:
    """Companion form of the AR(p) coefficient stack.

    ``ar_coeffs`` has shape (p, n, n). The result is the (np x np) block
    matrix with [A_1 ... A_p] in the top block row and identity blocks on
    the subdiagonal; its spectral radius < 1 iff the process is stationary.
    For p = 0 the result is the empty (0, 0) matrix.
    """
    ar_coeffs = np.asarray(ar_coeffs, dtype=float)
    if ar_coeffs.ndim != 3:
        raise ValueError("ar_coeffs must have shape (p, n, n)")
    p, n, _ = ar_coeffs.shape
    if p == 0:
        return np.zeros((0, 0))
    comp = np.zeros((n * p, n * p))
    comp[:n, :] = np.concatenate(list(ar_coeffs), axis=1)
    if p > 1:
        idx = np.arange(n * (p - 1))
        comp[n + idx, idx] = 1.0
    return comp


def spectral_radius(mat: np.ndarray) -> float:
    """Largest eigenvalue modulus; 0.0 for an empty matrix."""
    if mat.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(mat))))


@dataclass
class ValidationReport:
    """Outcome of parameter validation; empty ``violations`` means valid."""

    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


class ModelParams:
    """Full parameter set theta = (beta, A_1..A_p, sigma).

    Parameters
    ----------
    beta : (q, n) array
        Regression coefficients, column i belongs to series i.
    ar_coeffs : (p, n, n) array or sequence of p (n, n) arrays
        AR coefficient matrices A_1..A_p. May be empty (p = 0).
    sigma : (n,) array
        Noise standard deviations, strictly positive.
    validate : bool
        When True (default) raise ``ValueError`` if the parameters violate
        an invariant (non-positive sigma, non-stationary AR, non-finite
        entries). Pass False to build an instance for inspection and run
        :func:`validate_params` on it manually.
    """

    def __init__(self, beta, ar_coeffs, sigma, validate: bool = True):
        self.beta = np.atleast_2d(np.asarray(beta, dtype=float))
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        self.sigma = sigma
        n = sigma.shape[0]
        ar = np.asarray(ar_coeffs, dtype=float)
        if ar.size == 0:
            ar = ar.reshape(0, n, n)
        if ar.ndim != 3 or ar.shape[1:] != (n, n):
            raise ValueError(
                f"ar_coeffs must have shape (p, {n}, {n}), got {ar.shape}"
            )
        self.ar_coeffs = ar
        if self.beta.shape[1] != n:
            raise ValueError(
                f"beta must have shape (q, {n}), got {self.beta.shape}"
            )
        if validate:
            report = validate_params(self)
            if not report.ok:
                raise ValueError("invalid parameters: " + "; ".join(report.violations))

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def p(self) -> int:
        return self.ar_coeffs.shape[0]

    @property
    def q(self) -> int:
        return self.beta.shape[0]

    @property
    def n_free(self) -> int:
        """Number of free parameters, n(q + pn + 1)."""
        return self.n * (self.q + self.p * self.n + 1)

    def companion(self) -> np.ndarray:
        return companion_matrix(self.ar_coeffs)

    def sigma2(self) -> np.ndarray:
        return self.sigma**2

    def to_vector(self) -> np.ndarray:
        """Vectorize as vec([beta' | A_1 | ... | A_p | sigma]), column-stacked."""
        blocks = [self.beta.T] + list(self.ar_coeffs) + [self.sigma[:, None]]
        return np.hstack(blocks).ravel(order="F")

    @classmethod
    def from_vector(cls, vec, n: int, p: int, q: int, validate: bool = True):
        vec = np.asarray(vec, dtype=float)
        expected = n * (q + p * n + 1)
        if vec.shape != (expected,):
            raise ValueError(f"expected vector of length {expected}, got {vec.shape}")
        mat = vec.reshape(n, q + p * n + 1, order="F")
        beta = mat[:, :q].T
        ar = np.stack(
            [mat[:, q + k * n : q + (k + 1) * n] for k in range(p)], axis=0
        ) if p else np.zeros((0, n, n))
        sigma = mat[:, -1]
        return cls(beta, ar, sigma, validate=validate)

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.beta.copy(), self.ar_coeffs.copy(), self.sigma.copy(), validate=False
        )

    def __repr__(self) -> str:
        return f"ModelParams(n={self.n}, p={self.p}, q={self.q})"


def validate_params(params: ModelParams) -> ValidationReport:
    """Report-style validation: lists violations instead of raising."""
    report = ValidationReport()
    if not np.all(np.isfinite(params.beta)):
        report.violations.append("beta contains non-finite entries")
    if not np.all(np.isfinite(params.ar_coeffs)):
        report.violations.append("ar_coeffs contains non-finite entries")
    if not np.all(np.isfinite(params.sigma)):
        report.violations.append("sigma contains non-finite entries")
    elif np.any(params.sigma <= 0):
        report.violations.append("sigma must be strictly positive")
    if np.all(np.isfinite(params.ar_coeffs)) and params.p > 0:
        rho = spectral_radius(params.companion())
        if rho >= 1.0:
            report.violations.append(
                f"companion spectral radius {rho:.6f} >= 1 (non-stationary)"
            )
    return report


class CountPanel:
    """Observed counts plus per-series covariate designs.

    Parameters
    ----------
    counts : (n, N) array of nonnegative integers
        Row i is series i.
    covariates : (N, q) or (n, N, q) array
        Covariate vectors z_{t,i}. A single (N, q) design is shared by all
        series (the common case).
    series_labels : sequence of n strings, optional
    """

    def __init__(self, counts, covariates, series_labels=None):
        counts = np.asarray(counts)
        if counts.ndim != 2:
            raise ValueError("counts must be a 2-D (n, N) array")
        if not np.issubdtype(counts.dtype, np.integer):
            as_int = np.asarray(counts, dtype=np.int64)
            if not np.array_equal(as_int, counts):
                raise ValueError("counts must be integers")
            counts = as_int
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        self.counts = counts.astype(np.int64)
        n, N = counts.shape

        cov = np.asarray(covariates, dtype=float)
        if cov.ndim == 2:
            cov = np.broadcast_to(cov, (n,) + cov.shape).copy()
        if cov.ndim != 3 or cov.shape[:2] != (n, N):
            raise ValueError(
                f"covariates must have shape ({n}, {N}, q) or ({N}, q), got {cov.shape}"
            )
        if not np.all(np.isfinite(cov)):
            raise ValueError("covariates must be finite")
        self.covariates = cov

        if series_labels is None:
            series_labels = [f"s{i + 1}" for i in range(n)]
        if len(series_labels) != n:
            raise ValueError("series_labels length must equal the series count")
        self.series_labels = list(series_labels)

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def N(self) -> int:
        return self.counts.shape[1]

    @property
    def q(self) -> int:
        return self.covariates.shape[2]

    def check_order(self, p: int) -> None:
        """The proposal regimes need N >= 2p+1 so boundary blocks do not overlap."""
        if self.N < 2 * p + 1:
            raise ValueError(f"N={self.N} too short for AR order p={p}; need N >= {2 * p + 1}")

    def __repr__(self) -> str:
        return f"CountPanel(n={self.n}, N={self.N}, q={self.q})"


@dataclass
class LatentSample:
    """One draw of the latent matrix X (n x N)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("latent values must be a 2-D (n, N) array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("latent values must be finite")
