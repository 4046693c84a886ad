"""Stationary covariance of the stacked latent AR(p) state.

The stacked state is scr_X(t) = [X(t); X(t-1); ...; X(t-p+1)] with companion
dynamics scr_X(t) = comp @ scr_X(t-1) + W(t), where W(t) carries eps(t) in its
first block. The lag-0 covariance R = R_XX(0) (np x np) solves the fixed point
R = comp R comp' + R_WW(0), vectorized as
vec(R) = (I_{(np)^2} - comp (x) comp)^{-1} vec(R_WW(0)).
"""

from __future__ import annotations

import numpy as np

from .exceptions import NonStationaryError, NumericalError
from .params import ModelParams, companion_matrix, spectral_radius

__all__ = ["StationaryCov", "stationary_covariance"]

# above this many unknowns the dense Kronecker solve is replaced by
# fixed-point iteration (converges since rho(comp) < 1)
_DENSE_LIMIT = 1_000_000


class StationaryCov:
    """Lag-0 covariance of the stacked state and its inverse.

    Attributes
    ----------
    block : (np, np) array
        R_scrX(0) in the stacked (newest-first) block order; block (a, b)
        is R_XX(b - a) with R_XX(h) = E[X(t) X(t-h)'].
    precision : (np, np) array
        block^{-1}.
    fwd_block, fwd_precision : (np, np) arrays
        The same two matrices reordered to the forward stacking
        [X(1); ...; X(p)] (block reversal conjugation). The sampler's
        initial-regime formulas index precision blocks against X(i) in
        forward time order, so these are what it consumes.
    rww : (np, np) array
        Driving-noise covariance R_WW(0) = blockdiag(Sigma, 0, ..., 0).
    """

    def __init__(self, block, precision, rww, n, p):
        self.block = block
        self.precision = precision
        self.rww = rww
        self.n = n
        self.p = p
        rev = self._reversal_indices(n, p)
        self.fwd_block = block[np.ix_(rev, rev)]
        self.fwd_precision = precision[np.ix_(rev, rev)]

    @staticmethod
    def _reversal_indices(n: int, p: int) -> np.ndarray:
        idx = np.arange(n * p).reshape(p, n)[::-1].ravel()
        return idx

    @property
    def r0(self) -> np.ndarray:
        """Marginal covariance R_XX(0) of X(t) (top-left block)."""
        return self.block[: self.n, : self.n]

    def lag_block(self, h: int) -> np.ndarray:
        """R_XX(h) for 0 <= h <= p-1, read off the first block row."""
        if not 0 <= h < max(self.p, 1):
            raise ValueError(f"lag {h} outside stored range 0..{self.p - 1}")
        n = self.n
        return self.block[:n, h * n : (h + 1) * n]

    def fwd_precision_block(self, a: int, b: int) -> np.ndarray:
        """Block (a, b), 1-based, of the precision of [X(1); ...; X(p)]."""
        n = self.n
        return self.fwd_precision[(a - 1) * n : a * n, (b - 1) * n : b * n]


def _solve_dense(comp: np.ndarray, rww: np.ndarray) -> np.ndarray:
    d = comp.shape[0]
    eye = np.eye(d * d)
    system = eye - np.kron(comp, comp)
    try:
        vec_r = np.linalg.solve(system, rww.ravel(order="F"))
    except np.linalg.LinAlgError as exc:
        raise NonStationaryError(
            "(I - comp (x) comp) is singular; the AR process is not stationary"
        ) from exc
    return vec_r.reshape(d, d, order="F")


def _solve_fixed_point(comp: np.ndarray, rww: np.ndarray, tol: float = 1e-14,
                       max_iter: int = 100_000) -> np.ndarray:
    r = rww.copy()
    for _ in range(max_iter):
        r_next = comp @ r @ comp.T + rww
        if np.max(np.abs(r_next - r)) <= tol * max(1.0, np.max(np.abs(r_next))):
            return r_next
        r = r_next
    raise NumericalError("fixed-point iteration for the stationary covariance stalled")


def stationary_covariance(params: ModelParams) -> StationaryCov:
    """Solve R = comp R comp' + R_WW(0) for the stacked lag-0 covariance.

    Raises
    ------
    NonStationaryError
        If the Kronecker system is singular (unit root).
    NumericalError
        If the solution fails the positive-definiteness check.
    """
    n, p = params.n, params.p
    if p == 0:
        empty = np.zeros((0, 0))
        return StationaryCov(empty, empty, empty, n, 0)
    comp = companion_matrix(params.ar_coeffs)
    if spectral_radius(comp) >= 1.0:
        raise NonStationaryError("companion spectral radius >= 1")
    rww = np.zeros((n * p, n * p))
    rww[:n, :n] = np.diag(params.sigma2())
    if (n * p) ** 2 <= _DENSE_LIMIT:
        block = _solve_dense(comp, rww)
    else:
        block = _solve_fixed_point(comp, rww)
    block = 0.5 * (block + block.T)
    try:
        chol = np.linalg.cholesky(block)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("stationary covariance is not positive definite") from exc
    inv_chol = np.linalg.inv(chol)
    precision = inv_chol.T @ inv_chol
    precision = 0.5 * (precision + precision.T)
    return StationaryCov(block, precision, rww, n, p)
