"""Hot loops, compiled with numba when available.

Set ``ERGODRIFT_DISABLE_NUMBA=1`` to force the pure-numpy implementations.
Both implementations are always importable from :data:`NUMPY` and
:data:`NUMBA` (the latter is ``None`` when numba is missing) so that they can
be compared in tests and benchmarks.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np
from scipy.signal import fftconvolve

# numpy implementations


def _inverse_recursion_np(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    n = a.shape[0]
    b = np.empty(n)
    b[0] = 1.0 / a[0]
    for k in range(1, n):
        b[k] = -np.dot(a[1 : k + 1], b[k - 1 :: -1]) / a[0]
    return b


def _moving_average_np(a, x, start, stop):
    # out[i] = sum_{k=0}^{min(K, p)} a[k] x[p-k], p = start + i
    K = a.shape[0] - 1
    lo = max(0, start - K)
    seg = x[lo:stop]
    out = np.empty((stop - start, x.shape[1]))
    for c in range(x.shape[1]):
        full = np.convolve(seg[:, c], a)
        out[:, c] = full[start - lo : stop - lo]
    return out


def _successful_drift_np(a, g, start, stop, lo):
    # g[m] = -sum_{l=1}^{min(K, m-lo)} a[l] g[m-l], filled in place
    K = a.shape[0] - 1
    for m in range(start, stop):
        L = min(K, m - lo)
        if L <= 0:
            g[m] = 0.0
            continue
        g[m] = -(a[1 : L + 1] @ g[m - 1 : m - L - 1 if m - L - 1 >= 0 else None : -1])
    return g


def _memory_tail_np(a, g, tau, n_max, lo):
    # out[n] = sum_{k=n+1}^{K} a[k] g[tau+n-k] over g indices in [lo, tau)
    d = g.shape[1]
    out = np.zeros((n_max + 1, d))
    lo = max(lo, tau - (a.shape[0] - 1))
    if lo >= tau:
        return out
    seg = g[lo:tau]
    for c in range(d):
        full = fftconvolve(a, seg[:, c])
        # time tau+n corresponds to index tau+n-lo in full
        idx = np.arange(n_max + 1) + tau - lo
        ok = idx < full.shape[0]
        out[ok, c] = full[idx[ok]]
    return out


def _conv_sum_np(alpha, beta, n):
    k = np.arange(n + 1, dtype=np.float64)
    return float(np.sum((k + 1.0) ** (-alpha) * (n - k + 1.0) ** (-beta)))


def _conv_sum_grid_np(A, B, ns):
    # S(n) = sum_k A[k] B[n-k] at every n in ns
    out = np.empty(ns.shape[0])
    for i, n in enumerate(ns):
        out[i] = np.dot(A[: n + 1], B[n::-1])
    return out


def _affine_recursion_np(M, S, x0, deltas):
    # x[n+1] = M x[n] + S delta[n]
    n = deltas.shape[0]
    out = np.empty((n + 1, x0.shape[0]))
    out[0] = x0
    inc = deltas @ S.T
    for i in range(n):
        out[i + 1] = M @ out[i] + inc[i]
    return out


NUMPY = SimpleNamespace(
    inverse_recursion=_inverse_recursion_np,
    moving_average=_moving_average_np,
    successful_drift=_successful_drift_np,
    memory_tail=_memory_tail_np,
    conv_sum=_conv_sum_np,
    conv_sum_grid=_conv_sum_grid_np,
    affine_recursion=_affine_recursion_np,
)

# numba implementations

try:
    from numba import njit
except ImportError:  # pragma: no cover
    NUMBA = None
else:

    @njit(cache=True)
    def _inverse_recursion_nb(a):
        n = a.shape[0]
        b = np.empty(n)
        inv = 1.0 / a[0]
        b[0] = inv
        for k in range(1, n):
            s = 0.0
            for l in range(1, k + 1):
                s += a[l] * b[k - l]
            b[k] = -s * inv
        return b

    @njit(cache=True)
    def _moving_average_nb(a, x, start, stop):
        K = a.shape[0] - 1
        d = x.shape[1]
        out = np.empty((stop - start, d))
        for c in range(d):
            col = np.ascontiguousarray(x[:, c])
            for i in range(stop - start):
                p = start + i
                L = min(K, p)
                s = 0.0
                for k in range(L + 1):
                    s += a[k] * col[p - k]
                out[i, c] = s
        return out

    @njit(cache=True)
    def _successful_drift_nb(a, g, start, stop, lo):
        K = a.shape[0] - 1
        d = g.shape[1]
        for m in range(start, stop):
            L = min(K, m - lo)
            for c in range(d):
                s = 0.0
                for l in range(1, L + 1):
                    s += a[l] * g[m - l, c]
                g[m, c] = -s
        return g

    @njit(cache=True)
    def _memory_tail_nb(a, g, tau, n_max, lo):
        K = a.shape[0] - 1
        d = g.shape[1]
        out = np.zeros((n_max + 1, d))
        lo = max(lo, tau - K)
        for m in range(lo, tau):
            nz = False
            for c in range(d):
                if g[m, c] != 0.0:
                    nz = True
            if not nz:
                continue
            # k = tau + n - m ranges over [n+1, K]
            top = min(n_max, K - tau + m)
            for n in range(top + 1):
                ak = a[tau + n - m]
                for c in range(d):
                    out[n, c] += ak * g[m, c]
        return out

    @njit(cache=True)
    def _conv_sum_nb(alpha, beta, n):
        s = 0.0
        for k in range(n + 1):
            s += (k + 1.0) ** (-alpha) * (n - k + 1.0) ** (-beta)
        return s

    @njit(cache=True)
    def _conv_sum_grid_nb(A, B, ns):
        out = np.empty(ns.shape[0])
        for i in range(ns.shape[0]):
            n = ns[i]
            s = 0.0
            for k in range(n + 1):
                s += A[k] * B[n - k]
            out[i] = s
        return out

    @njit(cache=True)
    def _affine_recursion_nb(M, S, x0, deltas):
        n = deltas.shape[0]
        d = x0.shape[0]
        out = np.empty((n + 1, d))
        out[0] = x0
        for i in range(n):
            for r in range(d):
                v = 0.0
                for c in range(d):
                    v += M[r, c] * out[i, c] + S[r, c] * deltas[i, c]
                out[i + 1, r] = v
        return out

    NUMBA = SimpleNamespace(
        inverse_recursion=_inverse_recursion_nb,
        moving_average=_moving_average_nb,
        successful_drift=_successful_drift_nb,
        memory_tail=_memory_tail_nb,
        conv_sum=_conv_sum_nb,
        conv_sum_grid=_conv_sum_grid_nb,
        affine_recursion=_affine_recursion_nb,
    )


def _select():
    flag = os.environ.get("ERGODRIFT_DISABLE_NUMBA", "").strip().lower()
    if NUMBA is None or flag in ("1", "true", "yes", "on"):
        return "numpy", NUMPY
    return "numba", NUMBA


BACKEND, _impl = _select()


def inverse_recursion(a: np.ndarray) -> np.ndarray:
    return _impl.inverse_recursion(np.ascontiguousarray(a, dtype=np.float64))


def moving_average(a: np.ndarray, x: np.ndarray, start: int, stop: int) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    return _impl.moving_average(a, x, int(start), int(stop))


def successful_drift(a: np.ndarray, g: np.ndarray, start: int, stop: int, lo: int) -> np.ndarray:
    """Fill ``g[start:stop]`` in place; ``g`` must be C-contiguous float64."""
    return _impl.successful_drift(
        np.ascontiguousarray(a, dtype=np.float64), g, int(start), int(stop), int(lo)
    )


def memory_tail(a: np.ndarray, g: np.ndarray, tau: int, n_max: int, lo: int = 0) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    return _impl.memory_tail(a, g, int(tau), int(n_max), int(lo))


def conv_sum(alpha: float, beta: float, n: int) -> float:
    return float(_impl.conv_sum(float(alpha), float(beta), int(n)))


def conv_sum_grid(A: np.ndarray, B: np.ndarray, ns: np.ndarray) -> np.ndarray:
    return _impl.conv_sum_grid(
        np.ascontiguousarray(A, dtype=np.float64),
        np.ascontiguousarray(B, dtype=np.float64),
        np.ascontiguousarray(ns, dtype=np.int64),
    )


def affine_recursion(M: np.ndarray, S: np.ndarray, x0: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    return _impl.affine_recursion(
        np.ascontiguousarray(M, dtype=np.float64),
        np.ascontiguousarray(S, dtype=np.float64),
        np.ascontiguousarray(x0, dtype=np.float64),
        np.ascontiguousarray(deltas, dtype=np.float64),
    )
