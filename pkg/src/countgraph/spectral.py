"""Inverse spectral density, W_k expansion matrices, and partial coherence.

For a stationary VAR(p) with diagonal noise covariance Sigma, the inverse
spectral density is S^{-1}(w) = B(w)^H Sigma^{-1} B(w) with transfer matrix
B(w) = I - sum_k A_k e^{-ikw} (the 2*pi spectral constant is dropped; every
downstream quantity is either normalized or thresholded on zero patterns, so
constant scaling is immaterial).

S^{-1}(w) admits the finite trigonometric expansion

    S^{-1}(w) = -W_0 + sum_{k=1..p} (W_k e^{-ikw} + W_k' e^{ikw}) / 2

with W_0 = -Sigma^{-1} - sum_l A_l' Sigma^{-1} A_l and
W_k = -2 Sigma^{-1} A_k + 2 sum_{l=1..p-k} A_l' Sigma^{-1} A_{l+k}.
(Matching the d-th Fourier coefficient of B^H Sigma^{-1} B forces the minus
sign on W_0's second term; the off-diagonal zero pattern and magnitudes are
the same under either sign convention.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModelParams

__all__ = [
    "WStack",
    "CoherenceField",
    "compute_W",
    "inverse_spectral_density",
    "w_expansion",
    "partial_coherence",
]


@dataclass
class WStack:
    """The p+1 expansion matrices W_0..W_p of the inverse spectral density."""

    mats: np.ndarray  # (p+1, n, n)

    @property
    def p(self) -> int:
        return self.mats.shape[0] - 1

    @property
    def n(self) -> int:
        return self.mats.shape[1]

    def __getitem__(self, k: int) -> np.ndarray:
        return self.mats[k]


def compute_W(params: ModelParams) -> WStack:
    """W_0..W_p from (A_1..A_p, sigma)."""
    n, p = params.n, params.p
    prec = 1.0 / params.sigma2()  # diagonal of Sigma^{-1}
    a = params.ar_coeffs
    mats = np.zeros((p + 1, n, n))
    w0 = -np.diag(prec)
    for l in range(p):
        w0 -= a[l].T @ (prec[:, None] * a[l])
    mats[0] = 0.5 * (w0 + w0.T)
    for k in range(1, p + 1):
        wk = -2.0 * (prec[:, None] * a[k - 1])
        for l in range(1, p - k + 1):
            wk += 2.0 * a[l - 1].T @ (prec[:, None] * a[l + k - 1])
        mats[k] = wk
    return WStack(mats)


def inverse_spectral_density(params: ModelParams, omega: float) -> np.ndarray:
    """S^{-1}(w) = B(w)^H Sigma^{-1} B(w), Hermitian positive definite."""
    n, p = params.n, params.p
    b = np.eye(n, dtype=complex)
    for k in range(1, p + 1):
        b = b - params.ar_coeffs[k - 1] * np.exp(-1j * k * omega)
    prec = 1.0 / params.sigma2()
    return b.conj().T @ (prec[:, None] * b)


def w_expansion(wstack: WStack, omega: float) -> np.ndarray:
    """Evaluate -W_0 + sum_k (W_k e^{-ikw} + W_k' e^{ikw})/2."""
    out = -wstack.mats[0].astype(complex)
    for k in range(1, wstack.p + 1):
        wk = wstack.mats[k]
        out += 0.5 * (wk * np.exp(-1j * k * omega) + wk.T * np.exp(1j * k * omega))
    return out


@dataclass
class CoherenceField:
    """Partial coherence spectrum on a frequency grid.

    ``values[g]`` is R(w_g) = D^{-1/2} S^{-1}(w_g) D^{-1/2} with
    D = diag(S^{-1}(w_g)); ``rho[i, j]`` = max over the grid of |R_ij|.
    """

    grid: np.ndarray          # (G,)
    values: np.ndarray        # (G, n, n) complex
    rho: np.ndarray           # (n, n) real

    @property
    def n(self) -> int:
        return self.rho.shape[0]


def partial_coherence(params: ModelParams, grid_size: int = 512) -> CoherenceField:
    """Partial coherence over a uniform grid on [0, pi].

    The sup over frequencies in rho_ij = sup_w |R_ij(w)| is approximated by
    the grid maximum; the spectrum is even in w so [0, pi] suffices.
    """
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    n, p = params.n, params.p
    grid = np.linspace(0.0, np.pi, grid_size)
    eye = np.eye(n, dtype=complex)
    b = np.broadcast_to(eye, (grid_size, n, n)).copy()
    for k in range(1, p + 1):
        b -= params.ar_coeffs[k - 1][None] * np.exp(-1j * k * grid)[:, None, None]
    prec = 1.0 / params.sigma2()
    sinv = np.transpose(b.conj(), (0, 2, 1)) @ (prec[None, :, None] * b)
    sinv = 0.5 * (sinv + np.transpose(sinv.conj(), (0, 2, 1)))
    d = np.sqrt(np.real(np.einsum("gii->gi", sinv)))
    values = sinv / (d[:, :, None] * d[:, None, :])
    for g in range(grid_size):
        np.fill_diagonal(values[g], 1.0)
    rho = np.max(np.abs(values), axis=0)
    rho = 0.5 * (rho + rho.T)
    np.fill_diagonal(rho, 1.0)
    return CoherenceField(grid=grid, values=values, rho=rho)
