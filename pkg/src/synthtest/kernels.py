"""Hot numeric kernels with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``SYNTHTEST_NO_NUMBA`` is unset (or
``0``). Both paths consume the same pre-drawn random numbers, so they agree to
floating-point round-off; within one path results are bit-reproducible.

Kernels
-------
gibbs_truncnorm
    Sweeps of coordinate-wise truncated-normal Gibbs updates over independent rows.
kde_mean
    Mean product-kernel value (Gaussian on continuous dims, Aitchison-Aitken on
    discrete dims) of each query point against a data set.
rbf_sum
    Sum of ``exp(-gamma * |x - y|^2)`` over all pairs of two point sets.
pairwise_dist
    Condensed vector of pairwise Euclidean distances.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy import special
from scipy.spatial.distance import cdist, pdist

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_FLAG = "SYNTHTEST_NO_NUMBA"
USE_NUMBA = HAVE_NUMBA and os.environ.get(_FLAG, "").strip().lower() in ("", "0", "false", "no")

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_TINY = 1e-300
_CHUNK = 2048


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------------------


def _trunc_draw_np(a, b, u):
    """Inverse-CDF draw from N(0, 1) restricted to [a, b]; vectorized."""
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    pa = special.ndtr(lo)
    pb = special.ndtr(hi)
    p = np.clip(pa + u * (pb - pa), _TINY, 1.0 - 1e-16)
    with np.errstate(invalid="ignore"):
        x = special.ndtri(p)
    x = np.where(pb - pa > 0, x, hi)
    x = np.minimum(np.maximum(x, lo), hi)
    return np.where(flip, -x, x)


def _gibbs_truncnorm_np(Z, targets, coef, cond_sd, lo, hi, uniforms):
    n_sweeps = uniforms.shape[0]
    for s in range(n_sweeps):
        for k in range(targets.shape[0]):
            j = targets[k]
            m = Z @ coef[k]
            sd = cond_sd[k]
            if sd > 0:
                a = (lo[:, k] - m) / sd
                b = (hi[:, k] - m) / sd
                Z[:, j] = m + sd * _trunc_draw_np(a, b, uniforms[s, :, k])
            else:
                Z[:, j] = np.minimum(np.maximum(m, lo[:, k]), hi[:, k])
    return Z


def _kde_mean_np(query, data, cont_idx, inv_bw, disc_idx, same_w, diff_w):
    m = query.shape[0]
    n = data.shape[0]
    out = np.empty(m)
    log_norm = np.sum(np.log(inv_bw)) - cont_idx.shape[0] * _LOG_SQRT_2PI
    qc = query[:, cont_idx] * inv_bw
    dc = data[:, cont_idx] * inv_bw
    for start in range(0, m, _CHUNK):
        stop = min(start + _CHUNK, m)
        if cont_idx.shape[0]:
            logk = -0.5 * cdist(qc[start:stop], dc, "sqeuclidean") + log_norm
        else:
            logk = np.zeros((stop - start, n))
        for t in range(disc_idx.shape[0]):
            j = disc_idx[t]
            eq = query[start:stop, j][:, None] == data[:, j][None, :]
            logk = logk + np.where(eq, math.log(same_w[t]), math.log(diff_w[t]))
        out[start:stop] = np.exp(logk).sum(axis=1) / n
    return out


def _rbf_sum_np(X, Y, gamma):
    total = 0.0
    for start in range(0, X.shape[0], _CHUNK):
        total += float(np.exp(-gamma * cdist(X[start:start + _CHUNK], Y, "sqeuclidean")).sum())
    return total


def _pairwise_dist_np(X):
    return pdist(X)


# ---------------------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------------------

if HAVE_NUMBA:
    _njit = numba.njit(cache=True, nogil=True)
    # no infinities reach the distance kernels, so they may reassociate sums
    _njit_fast = numba.njit(cache=True, nogil=True, fastmath=True)

    _A = np.array([-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
                   1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00])
    _B = np.array([-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
                   6.680131188771972e01, -1.328068155288572e01])
    _C = np.array([-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
                   -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00])
    _D = np.array([7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
                   3.754408661907416e00])

    @_njit
    def _ndtr_nb(x):
        return 0.5 * math.erfc(-x / _SQRT2)

    @_njit
    def _ndtri_nb(p):
        # rational approximation followed by one Halley step
        if p <= 0.0:
            return -np.inf
        if p >= 1.0:
            return np.inf
        upper = p > 0.5
        pl = 1.0 - p if upper else p
        if pl < 0.02425:
            q = math.sqrt(-2.0 * math.log(pl))
            x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
                ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
        else:
            q = pl - 0.5
            r = q * q
            x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
                (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
        e = 0.5 * math.erfc(-x / _SQRT2) - pl
        u = e * math.exp(_LOG_SQRT_2PI + 0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
        return -x if upper else x

    @_njit
    def _trunc_draw_nb(a, b, u):
        flip = a > 0.0
        if flip:
            lo = -b
            hi = -a
        else:
            lo = a
            hi = b
        pa = _ndtr_nb(lo)
        pb = _ndtr_nb(hi)
        if pb - pa > 0.0:
            p = pa + u * (pb - pa)
            if p < _TINY:
                p = _TINY
            if p > 1.0 - 1e-16:
                p = 1.0 - 1e-16
            x = _ndtri_nb(p)
        else:
            x = hi
        if x < lo:
            x = lo
        if x > hi:
            x = hi
        return -x if flip else x

    @_njit
    def _gibbs_truncnorm_nb(Z, targets, coef, cond_sd, lo, hi, uniforms):
        n, d = Z.shape
        n_sweeps = uniforms.shape[0]
        nt = targets.shape[0]
        for s in range(n_sweeps):
            for i in range(n):
                for k in range(nt):
                    m = 0.0
                    for c in range(d):
                        m += coef[k, c] * Z[i, c]
                    sd = cond_sd[k]
                    if sd > 0.0:
                        a = (lo[i, k] - m) / sd
                        b = (hi[i, k] - m) / sd
                        Z[i, targets[k]] = m + sd * _trunc_draw_nb(a, b, uniforms[s, i, k])
                    else:
                        Z[i, targets[k]] = min(max(m, lo[i, k]), hi[i, k])
        return Z

    @_njit_fast
    def _kde_mean_nb(query, data, cont_idx, inv_bw, disc_idx, same_w, diff_w):
        m = query.shape[0]
        n = data.shape[0]
        nc = cont_idx.shape[0]
        nd = disc_idx.shape[0]
        log_norm = 0.0
        for t in range(nc):
            log_norm += math.log(inv_bw[t]) - _LOG_SQRT_2PI
        log_same = np.empty(nd)
        log_diff = np.empty(nd)
        for t in range(nd):
            log_same[t] = math.log(same_w[t])
            log_diff[t] = math.log(diff_w[t])
        out = np.empty(m)
        for i in range(m):
            acc = 0.0
            for r in range(n):
                e = 0.0
                for t in range(nc):
                    j = cont_idx[t]
                    z = (query[i, j] - data[r, j]) * inv_bw[t]
                    e += z * z
                lk = -0.5 * e + log_norm
                for t in range(nd):
                    j = disc_idx[t]
                    lk += log_same[t] if query[i, j] == data[r, j] else log_diff[t]
                acc += math.exp(lk)
            out[i] = acc / n
        return out

    @_njit_fast
    def _rbf_sum_nb(X, Y, gamma):
        total = 0.0
        d = X.shape[1]
        for i in range(X.shape[0]):
            row = 0.0
            for j in range(Y.shape[0]):
                e = 0.0
                for c in range(d):
                    t = X[i, c] - Y[j, c]
                    e += t * t
                row += math.exp(-gamma * e)
            total += row
        return total

    @_njit_fast
    def _pairwise_dist_nb(X):
        n, d = X.shape
        out = np.empty(n * (n - 1) // 2)
        k = 0
        for i in range(n):
            for j in range(i + 1, n):
                e = 0.0
                for c in range(d):
                    t = X[i, c] - X[j, c]
                    e += t * t
                out[k] = math.sqrt(e)
                k += 1
        return out


numpy_impl = {
    "gibbs_truncnorm": _gibbs_truncnorm_np,
    "kde_mean": _kde_mean_np,
    "rbf_sum": _rbf_sum_np,
    "pairwise_dist": _pairwise_dist_np,
}
numba_impl = {
    "gibbs_truncnorm": _gibbs_truncnorm_nb,
    "kde_mean": _kde_mean_nb,
    "rbf_sum": _rbf_sum_nb,
    "pairwise_dist": _pairwise_dist_nb,
} if HAVE_NUMBA else {}

_impl = numba_impl if USE_NUMBA else numpy_impl


def gibbs_truncnorm(Z, targets, coef, cond_sd, lo, hi, uniforms):
    """Run Gibbs sweeps in place on ``Z`` and return it.

    Parameters
    ----------
    Z : ndarray, shape (n, d)
        Latent rows; columns in ``targets`` are resampled, the rest are held fixed.
    targets : int ndarray, shape (t,)
    coef : ndarray, shape (t, d)
        Conditional-mean coefficients: ``mean_k = Z[i] @ coef[k]`` (zero on the target itself).
    cond_sd : ndarray, shape (t,)
    lo, hi : ndarray, shape (n, t)
        Per-row truncation bounds in latent space (may be infinite).
    uniforms : ndarray, shape (sweeps, n, t)
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    return _impl["gibbs_truncnorm"](Z, np.ascontiguousarray(targets, dtype=np.int64),
                                    np.ascontiguousarray(coef, dtype=np.float64),
                                    np.ascontiguousarray(cond_sd, dtype=np.float64),
                                    np.ascontiguousarray(lo, dtype=np.float64),
                                    np.ascontiguousarray(hi, dtype=np.float64),
                                    np.ascontiguousarray(uniforms, dtype=np.float64))


def kde_mean(query, data, cont_idx, inv_bw, disc_idx, same_w, diff_w):
    return _impl["kde_mean"](np.ascontiguousarray(query, dtype=np.float64),
                             np.ascontiguousarray(data, dtype=np.float64),
                             np.asarray(cont_idx, dtype=np.int64),
                             np.asarray(inv_bw, dtype=np.float64),
                             np.asarray(disc_idx, dtype=np.int64),
                             np.asarray(same_w, dtype=np.float64),
                             np.asarray(diff_w, dtype=np.float64))


def rbf_sum(X, Y, gamma: float) -> float:
    return float(_impl["rbf_sum"](np.ascontiguousarray(X, dtype=np.float64),
                                  np.ascontiguousarray(Y, dtype=np.float64), float(gamma)))


def pairwise_dist(X) -> np.ndarray:
    return _impl["pairwise_dist"](np.ascontiguousarray(X, dtype=np.float64))
