"""Single-site Metropolis-Hastings sweep kernel.

The kernel is written once as a plain Python function with explicit scalar
loops and math.* calls, then compiled with numba when available. Both paths
execute identical floating-point operations in identical order, so a fixed
random stream produces bit-identical chains with or without numba.

Selection: the jitted kernel is used when numba imports cleanly and the
environment variable COUNTGRAPH_DISABLE_NUMBA is unset/0/false; callers can
also force a path per call.

All randomness is consumed from pre-drawn arrays (standard normals and
uniforms), one pair per site visit, so the kernel itself is deterministic.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = ["get_kernel", "numba_available", "numba_enabled_by_default"]

_EXP_CAP = 700.0


def _sweep_impl(X, Yf, off, caseidx, K, Kinv, Phi, p, n_sweeps,
                record_slot, normals, unifs, out, acc, force_accept):
    """Run ``n_sweeps`` systematic sweeps over (t, i), updating X in place.

    X : (n, N) current latent state, mutated.
    Yf : (n, N) counts as floats.
    off : (n, N) covariate offsets z'beta.
    caseidx : (N,) proposal-case index per time.
    K, Kinv : (ncase, n, n) conditional precision of X(t) given the other
        time slices under the Gaussian prior, and its inverse.
    Phi : (ncase, 2p+1, n, n) forcing matrices; the conditional mean of the
        slice is Kinv @ sum_d Phi[c, d+p] @ X(t+d).
    record_slot : (n_sweeps,) output row for the state after each sweep,
        -1 to skip.
    normals, unifs : flat random streams, consumed one pair per site.
    out : (m, n, N) retained samples.
    acc : (n,) accepted-move counters.

    force_accept skips the Metropolis test, which turns the sweep into a
    plain Gibbs sampler for the Gaussian prior (used to validate the
    proposal machinery against the stationary covariance).
    """
    n = X.shape[0]
    N = X.shape[1]
    f = np.zeros(n)
    mu = np.zeros(n)
    idx = 0
    for s in range(n_sweeps):
        for t in range(N):
            c = caseidx[t]
            # conditional mean of the whole slice X(t) given its neighbors
            for a in range(n):
                f[a] = 0.0
            for d in range(-p, p + 1):
                if d == 0:
                    continue
                t2 = t + d
                if t2 < 0 or t2 >= N:
                    continue
                for a in range(n):
                    accum = 0.0
                    for b in range(n):
                        accum += Phi[c, d + p, a, b] * X[b, t2]
                    f[a] += accum
            for a in range(n):
                accum = 0.0
                for b in range(n):
                    accum += Kinv[c, a, b] * f[b]
                mu[a] = accum
            for i in range(n):
                # scalar conditional of X_i(t) given everything else: condition
                # the slice Gaussian on the current values of the other rows
                kii = K[c, i, i]
                dot = 0.0
                for j in range(n):
                    if j != i:
                        dot += K[c, i, j] * (X[j, t] - mu[j])
                mean_i = mu[i] - dot / kii
                sd_i = 1.0 / math.sqrt(kii)
                xprop = mean_i + sd_i * normals[idx]
                if force_accept:
                    X[i, t] = xprop
                    acc[i] += 1
                else:
                    xcur = X[i, t]
                    a_new = off[i, t] + xprop
                    a_cur = off[i, t] + xcur
                    if a_new > _EXP_CAP:
                        logr = -math.inf
                    elif a_cur > _EXP_CAP:
                        logr = math.inf
                    else:
                        logr = (xprop - xcur) * Yf[i, t] - (math.exp(a_new) - math.exp(a_cur))
                    u = unifs[idx]
                    logu = math.log(u) if u > 0.0 else -math.inf
                    if logu <= logr:
                        X[i, t] = xprop
                        acc[i] += 1
                idx += 1
        r = record_slot[s]
        if r >= 0:
            for i in range(n):
                for t in range(N):
                    out[r, i, t] = X[i, t]
    return idx


try:
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba installed
    njit = None
    _HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get("COUNTGRAPH_DISABLE_NUMBA", "0").lower() not in ("0", "", "false")


_kernel_jit = None
if _HAVE_NUMBA and not _env_disabled():
    _kernel_jit = njit(cache=True, nogil=True)(_sweep_impl)


def numba_available() -> bool:
    return _HAVE_NUMBA


def numba_enabled_by_default() -> bool:
    return _kernel_jit is not None


def get_kernel(use_numba=None):
    """Return the sweep kernel; ``use_numba`` None means the default path."""
    global _kernel_jit
    if use_numba is None:
        return _kernel_jit if _kernel_jit is not None else _sweep_impl
    if use_numba:
        if not _HAVE_NUMBA:
            raise RuntimeError("numba requested but not importable")
        if _kernel_jit is None:
            _kernel_jit = njit(cache=True, nogil=True)(_sweep_impl)
        return _kernel_jit
    return _sweep_impl
