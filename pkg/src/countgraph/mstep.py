"""Penalized M-step: Monte Carlo Q objective and its block maximizers.

The Q surface separates: the Poisson part depends on beta only and the
Gaussian part on (A, sigma) only, so the two blocks are maximized by
coordinate ascent (exact for beta). The E-step enters the objective only
through a handful of sufficient statistics (means of exp X, second-moment
matrices of stacked lags), so M-step cost is independent of the sample
count m once those are accumulated.

Off-diagonal |W_k| penalties are smoothed as sqrt(x^2 + eps^2) so the
whole objective stays differentiable; gradients below are analytic,
including the stationary initial-block term, which is differentiated by
solving the adjoint discrete Lyapunov equation rather than by forming the
(np)^2 x (np)^2 vec Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_discrete_lyapunov
from scipy.optimize import minimize

from .covariance import StationaryCov, stationary_covariance
from .exceptions import DivergenceError
from .likelihood import OVERFLOW_CAP, covariate_offsets, joint_log_density_samples
from .params import CountPanel, ModelParams, companion_matrix, spectral_radius
from .spectral import WStack, compute_W

__all__ = [
    "EStats",
    "OptimizerConfig",
    "GradParts",
    "compute_estats",
    "penalty_h1",
    "smoothed_penalty",
    "estimate_Q",
    "q_likelihood",
    "m_step_objective",
    "m_step",
    "initial_params",
]

_LOG2PI = math.log(2.0 * math.pi)
_BIG = 1e12


@dataclass(frozen=True)
class OptimizerConfig:
    """Inner M-step settings."""

    max_inner: int = 200          # L-BFGS iteration cap for the (A, sigma) block
    gtol: float = 1e-6
    smooth_eps: float = 1e-8      # |x| ~ sqrt(x^2 + eps^2)
    passes: int = 2               # block coordinate ascent sweeps
    sigma_min: float = 1e-4
    sigma_max: float = 1e3
    stationarity_margin: float = 1e-3
    include_initial_term: bool = True  # False drops the initial-block density (conditional likelihood)

    def __post_init__(self):
        if self.max_inner < 1 or self.passes < 1:
            raise ValueError("max_inner and passes must be >= 1")
        if not 0 < self.sigma_min < self.sigma_max:
            raise ValueError("need 0 < sigma_min < sigma_max")
        if self.smooth_eps <= 0:
            raise ValueError("smooth_eps must be > 0")


@dataclass
class EStats:
    """Sample-averaged sufficient statistics of the latent draws.

    M, Xbar : (n, N) means of exp(X) and X over samples.
    S_cond : ((p+1)n, (p+1)n) mean over samples of sum_{t>p} u u',
        u = [X(t); X(t-1); ...; X(t-p)].
    S_init_rev : (pn, pn) mean of v v', v = [X(p); ...; X(1)] newest first,
        matching the stationary block ordering.
    xy_const : sum_{i,t} Xbar[i,t] Y[i,t] (theta-independent Poisson piece).
    """

    M: np.ndarray
    Xbar: np.ndarray
    S_cond: np.ndarray
    S_init_rev: np.ndarray
    xy_const: float
    m: int
    p: int


@dataclass
class GradParts:
    """Objective gradient split by parameter block; logsigma chain-ruled."""

    beta: np.ndarray
    ar: np.ndarray
    logsigma: np.ndarray

    def ravel(self) -> np.ndarray:
        return np.concatenate(
            [self.beta.ravel(), self.ar.ravel(), self.logsigma.ravel()]
        )


def _sample_array(samples) -> np.ndarray:
    """Accept SampleResult, (m,n,N) array, (n,N) array, or a list of draws."""
    v = getattr(samples, "values", samples)
    if isinstance(v, np.ndarray):
        return v if v.ndim == 3 else v[None]
    arrs = [np.asarray(getattr(s, "values", s), dtype=float) for s in v]
    if not arrs:
        raise ValueError("samples must be nonempty")
    return np.stack(arrs)


def compute_estats(panel: CountPanel, samples, p: int) -> EStats:
    values = _sample_array(samples)
    m, n, N = values.shape
    if (n, N) != (panel.n, panel.N):
        raise ValueError("sample shape does not match panel")
    M = np.exp(values).mean(axis=0)
    Xbar = values.mean(axis=0)
    xy = float(np.sum(Xbar * panel.counts))

    U = np.empty((m, (p + 1) * n, N - p))
    for j in range(p + 1):
        U[:, j * n : (j + 1) * n, :] = values[:, :, p - j : N - j]
    S_cond = np.tensordot(U, U, axes=((0, 2), (0, 2))) / m

    if p:
        V = np.empty((m, p * n))
        for a in range(1, p + 1):
            V[:, (a - 1) * n : a * n] = values[:, :, p - a]
        S_init = V.T @ V / m
    else:
        S_init = np.zeros((0, 0))
    return EStats(M=M, Xbar=Xbar, S_cond=S_cond, S_init_rev=S_init,
                  xy_const=xy, m=m, p=p)


def penalty_h1(w: WStack) -> float:
    """Sum of |off-diagonal| entries across the W stack."""
    off = ~np.eye(w.n, dtype=bool)
    return float(sum(np.abs(mat[off]).sum() for mat in w.mats))


def smoothed_penalty(params: ModelParams, eps: float = 1e-8):
    """Smoothed h1 and its gradient wrt (A_1..A_p, log sigma).

    W_0 = -P - sum_l A_l' P A_l and W_k = -2 P A_k + 2 sum_l A_l' P A_{l+k}
    with P = diag(1/sigma^2) are polynomial in the parameters, so the
    chain rule lands on a handful of matrix products per (k, l) pair.
    """
    n, p = params.n, params.p
    a = params.ar_coeffs
    prec = 1.0 / params.sigma**2
    w = compute_W(params)
    off = 1.0 - np.eye(n)

    h = 0.0
    dA = np.zeros((p, n, n))
    dp = np.zeros(n)

    s0 = np.sqrt(w.mats[0] ** 2 + eps * eps)
    h += float(np.sum(off * s0))
    D0 = off * w.mats[0] / s0
    for l in range(1, p + 1):
        dA[l - 1] += -(prec[:, None] * a[l - 1]) @ (D0 + D0.T)
        dp += -np.einsum("ij,jm,im->i", a[l - 1], D0, a[l - 1])

    for k in range(1, p + 1):
        sk = np.sqrt(w.mats[k] ** 2 + eps * eps)
        h += float(np.sum(off * sk))
        Dk = off * w.mats[k] / sk
        dA[k - 1] += -2.0 * prec[:, None] * Dk
        dp += -2.0 * np.einsum("ij,ij->i", a[k - 1], Dk)
        for l in range(1, p - k + 1):
            dA[l - 1] += 2.0 * prec[:, None] * (a[l + k - 1] @ Dk.T)
            dA[l + k - 1] += 2.0 * prec[:, None] * (a[l - 1] @ Dk)
            dp += 2.0 * np.einsum("ij,mj,im->i", a[l + k - 1], Dk, a[l - 1])

    dlogsig = dp * (-2.0 * prec)
    return h, dA, dlogsig


def estimate_Q(panel: CountPanel, samples, params: ModelParams,
               gamma: float = 0.0, stat: StationaryCov | None = None) -> float:
    """Monte Carlo objective: mean joint log-density minus gamma * h1."""
    values = _sample_array(samples)
    if params.p and stat is None:
        stat = stationary_covariance(params)
    ll = float(joint_log_density_samples(panel, values, params, stat).mean())
    if gamma:
        ll -= gamma * penalty_h1(compute_W(params))
    return ll


def _cond_stack_matrix(params: ModelParams) -> np.ndarray:
    """C = [I, -A_1, ..., -A_p] so that C u = eps(t) for stacked lags u."""
    n, p = params.n, params.p
    return np.hstack([np.eye(n)] + [-params.ar_coeffs[k] for k in range(p)])


def q_likelihood(panel: CountPanel, estats: EStats, params: ModelParams,
                 stat: StationaryCov | None = None) -> float:
    """Mean joint log-density over the samples, from sufficient statistics.

    Agrees with averaging joint_log_density over the draws up to float
    round-off; the log y! constant is excluded there too.
    """
    n, N, p = params.n, panel.N, params.p
    off = covariate_offsets(panel, params)
    if off.max() > OVERFLOW_CAP:
        raise DivergenceError(f"log-mean exceeds overflow cap {OVERFLOW_CAP}")
    qp = float(np.sum(off * panel.counts)) + estats.xy_const \
        - float(np.sum(np.exp(off) * estats.M))

    prec = 1.0 / params.sigma**2
    C = _cond_stack_matrix(params)
    CS = C @ estats.S_cond
    cdiag = np.einsum("ij,ij->i", CS, C)
    tc = -0.5 * float(prec @ cdiag) \
        - (N - p) * (0.5 * n * _LOG2PI + float(np.sum(np.log(params.sigma))))

    ti = 0.0
    if p:
        if stat is None:
            stat = stationary_covariance(params)
        sign, logdet = np.linalg.slogdet(stat.block)
        ti = -0.5 * (float(np.sum(stat.precision * estats.S_init_rev))
                     + logdet + n * p * _LOG2PI)
    return qp + tc + ti


def _gauss_value_grad(estats: EStats, params: ModelParams, gamma: float,
                      opt: OptimizerConfig, N: int, want_grad: bool = True):
    """(A, sigma) part of the smoothed objective and its gradient.

    Returns (value, dA, dlogsig). Conditional term from S_cond, initial
    term via adjoint Lyapunov solve, penalty via smoothed_penalty. With
    want_grad=False the gradient work (adjoint solve, penalty chain rule)
    is skipped and (value, None, None) returned.
    """
    n, p = params.n, params.p
    sigma = params.sigma
    prec = 1.0 / sigma**2
    C = _cond_stack_matrix(params)
    CS = C @ estats.S_cond
    cdiag = np.einsum("ij,ij->i", CS, C)
    value = -0.5 * float(prec @ cdiag) \
        - (N - p) * (0.5 * n * _LOG2PI + float(np.sum(np.log(sigma))))
    dA = dlogsig = None
    if want_grad:
        dA = np.empty((p, n, n))
        for k in range(1, p + 1):
            dA[k - 1] = prec[:, None] * CS[:, k * n : (k + 1) * n]
        dlogsig = prec * cdiag - (N - p)

    if p and opt.include_initial_term:
        stat = stationary_covariance(params)
        R = stat.block
        lam = stat.precision
        sign, logdet = np.linalg.slogdet(R)
        value += -0.5 * (float(np.sum(lam * estats.S_init_rev))
                         + logdet + n * p * _LOG2PI)
        if want_grad:
            comp = companion_matrix(params.ar_coeffs)
            G = 0.5 * (lam @ estats.S_init_rev @ lam - lam)
            G = 0.5 * (G + G.T)
            Gbar = solve_discrete_lyapunov(comp.T, G, method="bilinear")
            M2 = 2.0 * Gbar @ comp @ R
            for k in range(1, p + 1):
                dA[k - 1] += M2[:n, (k - 1) * n : k * n]
            dlogsig += 2.0 * np.diag(Gbar)[:n] * sigma**2

    if gamma:
        if want_grad:
            h, hA, hls = smoothed_penalty(params, opt.smooth_eps)
            dA -= gamma * hA
            dlogsig -= gamma * hls
        else:
            eps = opt.smooth_eps
            off = 1.0 - np.eye(n)
            h = sum(float(np.sum(off * np.sqrt(mat**2 + eps * eps)))
                    for mat in compute_W(params).mats)
        value -= gamma * h
    return value, dA, dlogsig


def _poisson_value_grad(panel: CountPanel, estats: EStats, params: ModelParams):
    """beta part of the objective: sum over sites of Omega*Y - e^Omega*M."""
    off = covariate_offsets(panel, params)
    if off.max() > OVERFLOW_CAP:
        return -np.inf, np.zeros_like(params.beta)
    resid = panel.counts - np.exp(off) * estats.M      # (n, N)
    value = float(np.sum(off * panel.counts)) + estats.xy_const \
        - float(np.sum(np.exp(off) * estats.M))
    gbeta = np.einsum("itq,it->qi", panel.covariates, resid)
    return value, gbeta


def m_step_objective(panel: CountPanel, estats: EStats, params: ModelParams,
                     gamma: float, settings: OptimizerConfig | None = None):
    """Smoothed penalized Q and its analytic gradient at params.

    This is the exact surface the M-step maximizes (block-wise); the only
    difference from estimate_Q is the eps-smoothed |W| penalty.
    """
    opt = settings or OptimizerConfig()
    vp, gbeta = _poisson_value_grad(panel, estats, params)
    if not np.isfinite(vp):
        z = GradParts(np.zeros_like(params.beta),
                      np.zeros((params.p, params.n, params.n)),
                      np.zeros(params.n))
        return -np.inf, z
    rho = spectral_radius(companion_matrix(params.ar_coeffs)) if params.p else 0.0
    if rho >= 1.0 - 1e-9:
        z = GradParts(np.zeros_like(params.beta),
                      np.zeros((params.p, params.n, params.n)),
                      np.zeros(params.n))
        return -_BIG * (1.0 + rho), z
    vg, dA, dls = _gauss_value_grad(estats, params, gamma, opt, panel.N)
    return vp + vg, GradParts(beta=gbeta, ar=dA, logsigma=dls)


def _newton_beta(z: np.ndarray, y: np.ndarray, mfac: np.ndarray,
                 b0: np.ndarray, max_iter: int = 50) -> np.ndarray:
    """Maximize sum_t (z'b) y - e^{z'b} mfac over b (concave in b)."""

    def val(b):
        om = z @ b
        if om.max() > OVERFLOW_CAP:
            return -np.inf
        return float(om @ y - np.exp(om) @ mfac)

    b = b0.copy()
    f = val(b)
    for _ in range(max_iter):
        om = z @ b
        mu = np.exp(np.minimum(om, OVERFLOW_CAP)) * mfac
        g = z.T @ (y - mu)
        H = (z * mu[:, None]).T @ z
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = g / (1.0 + np.diag(H).max())
        # damped Newton: halve until the concave objective improves
        for _ in range(40):
            fn = val(b + step)
            if fn >= f:
                break
            step *= 0.5
        else:
            return b
        if fn - f <= 1e-12 * (1.0 + abs(f)) and np.linalg.norm(step) <= 1e-10 * (
            1.0 + np.linalg.norm(b)
        ):
            return b + step
        b = b + step
        f = fn
    return b


def _update_beta(panel: CountPanel, estats: EStats, params: ModelParams) -> np.ndarray:
    beta = params.beta.copy()
    y = panel.counts.astype(float)
    for i in range(panel.n):
        beta[:, i] = _newton_beta(panel.covariates[i], y[i], estats.M[i], beta[:, i])
    return beta


def _update_gauss(estats: EStats, params: ModelParams, gamma: float,
                  opt: OptimizerConfig, N: int) -> tuple[np.ndarray, np.ndarray]:
    """L-BFGS ascent over (A entries, log sigma); returns (ar_coeffs, sigma)."""
    n, p = params.n, params.p
    nA = p * n * n

    def split(x):
        a = x[:nA].reshape(p, n, n)
        sig = np.exp(x[nA:])
        return a, sig

    def neg(x):
        a, sig = split(x)
        if p:
            rho = spectral_radius(companion_matrix(a))
            if rho >= 0.999:
                # steep plateau pushes the line search back inside the
                # stationary region; gradient intentionally zero
                return _BIG * (1.0 + rho - 0.999), np.zeros_like(x)
        trial = ModelParams(params.beta, a, sig, validate=False)
        v, dA, dls = _gauss_value_grad(estats, trial, gamma, opt, N)
        return -v, -np.concatenate([dA.ravel(), dls])

    x0 = np.concatenate([params.ar_coeffs.ravel(), np.log(params.sigma)])
    bounds = [(None, None)] * nA + [
        (math.log(opt.sigma_min), math.log(opt.sigma_max))
    ] * n
    res = minimize(neg, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": opt.max_inner, "gtol": opt.gtol,
                            "ftol": 1e-13})
    a, sig = split(res.x)

    if p and gamma:
        # L-BFGS stalls short of the |W| kinks, leaving coefficients that
        # belong at zero stranded near the soft threshold. Try exact zeros
        # coordinate-wise and keep each one that does not lower the
        # objective; this is plain coordinate descent at the kink.
        def value_at(a_try):
            if spectral_radius(companion_matrix(a_try)) >= 0.999:
                return -np.inf
            trial = ModelParams(params.beta, a_try, sig, validate=False)
            return _gauss_value_grad(estats, trial, gamma, opt, N,
                                     want_grad=False)[0]

        a_flat = a.ravel()
        best = value_at(a)
        for _ in range(2):
            changed = False
            for flat in np.argsort(np.abs(a_flat)):
                saved = a_flat[flat]
                if saved == 0.0:
                    continue
                a_flat[flat] = 0.0
                v = value_at(a)
                if v >= best - 1e-12:
                    best = v
                    changed = True
                else:
                    a_flat[flat] = saved
            if not changed:
                break

    if p:
        rho = spectral_radius(companion_matrix(a))
        if rho >= 1.0 - opt.stationarity_margin:
            # scaling A_k by c^k scales every companion eigenvalue by c
            c = (1.0 - opt.stationarity_margin) / rho
            for k in range(1, p + 1):
                a[k - 1] *= c**k
    return a, sig


def m_step(panel: CountPanel, samples, params_init: ModelParams, gamma: float,
           settings: OptimizerConfig | None = None) -> ModelParams:
    """Maximize the smoothed penalized Q over theta; see _m_step_info."""
    params, _ = _m_step_info(panel, samples, params_init, gamma, settings)
    return params


def _m_step_info(panel: CountPanel, samples, params_init: ModelParams,
                 gamma: float, settings: OptimizerConfig | None = None,
                 estats: EStats | None = None):
    """Block coordinate ascent; returns (params, info).

    info carries the smoothed objective before/after and an improvement
    flag. A non-improving inner optimizer is flagged and the incoming
    parameters are kept, so the M-step never degrades Q on its sample set.
    """
    opt = settings or OptimizerConfig()
    if estats is None:
        estats = compute_estats(panel, samples, params_init.p)
    params = params_init.copy()
    q0, _ = m_step_objective(panel, estats, params, gamma, opt)
    for _ in range(opt.passes):
        beta = _update_beta(panel, estats, params)
        params = ModelParams(beta, params.ar_coeffs, params.sigma, validate=False)
        a, sig = _update_gauss(estats, params, gamma, opt, panel.N)
        params = ModelParams(beta, a, sig, validate=False)
    q1, _ = m_step_objective(panel, estats, params, gamma, opt)
    improved = q1 >= q0 - 1e-8 * (1.0 + abs(q0))
    if not improved:
        params = params_init.copy()
        q1 = q0
    final = ModelParams(params.beta, params.ar_coeffs, params.sigma)
    return final, {"q_init": q0, "q_final": q1, "improved": improved}


def initial_params(panel: CountPanel, p: int, sigma0: float = 0.5) -> ModelParams:
    """Starting theta: per-series Poisson regressions ignoring the latent
    field, A = 0, sigma = sigma0."""
    n, q = panel.n, panel.q
    beta = np.zeros((q, n))
    y = panel.counts.astype(float)
    ones = np.ones(panel.N)
    for i in range(n):
        beta[:, i] = _newton_beta(panel.covariates[i], y[i], ones, beta[:, i])
    return ModelParams(beta, np.zeros((p, n, n)), np.full(n, float(sigma0)))
