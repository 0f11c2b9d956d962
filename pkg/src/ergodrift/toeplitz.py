"""Inversion of the lower-triangular Toeplitz operator of a moving-average kernel.

The inverse kernel ``b`` satisfies ``sum_{k<=i} b_k a_{i-k} = 1{i == 0}``. It
turns a noise path back into innovations and governs how a drift injected at
one time propagates through the memory.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from . import _kernels
from .coeffs import CoefficientSequence, check_log_convex, exp_inverse_rate
from .errors import (
    ComplexityGuardError,
    DivergentInverseWarning,
    DomainError,
    InapplicableError,
    InsufficientDataError,
    NonInvertibleError,
)

COMBINATORIAL_K_MAX = 20


@dataclass(frozen=True)
class InverseSequence:
    values: np.ndarray
    source: str
    zeta_or_beta: Optional[float] = None

    @property
    def K(self) -> int:
        return self.values.shape[0] - 1

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    k_range: tuple
    residual_rms: float
    n_points: int
    n_dropped: int = 0

    @property
    def decade_ok(self) -> bool:
        return self.k_range[1] > 2 * self.k_range[0]


@dataclass(frozen=True)
class BoundReport:
    max_sign_violation: float
    max_bound_violation: float
    passed: bool


def _values(x) -> np.ndarray:
    if hasattr(x, "values"):
        return np.asarray(x.values, dtype=np.float64)
    return np.asarray(x, dtype=np.float64)


def _frozen(x) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    x.setflags(write=False)
    return x


def _decay_hint(a) -> Optional[float]:
    if isinstance(a, CoefficientSequence) and a.family == "exponential":
        return a.zeta
    return None


def invert_coeffs(a, method: str = "recursion") -> InverseSequence:
    """Inverse kernel by the triangular recursion.

    ``b_0 = 1/a_0`` and ``b_k = -(1/a_0) sum_{l=1}^k a_l b_{k-l}``.
    ``method="newton"`` selects a power-series Newton iteration built on FFT
    products; it is faster for long kernels and agrees with the recursion to
    rounding.
    """
    v = _values(a)
    if v.ndim != 1 or v.shape[0] == 0:
        raise DomainError("kernel must be a non-empty 1-d sequence")
    if v[0] == 0:
        raise NonInvertibleError("leading coefficient is zero, the kernel is not invertible")
    if method == "recursion":
        b = _kernels.inverse_recursion(v)
    elif method == "newton":
        b = _newton_inverse(v)
    else:
        raise DomainError(f"unknown inversion method {method!r}")
    return InverseSequence(_frozen(b), "recursion" if method == "recursion" else "newton", _decay_hint(a))


def _newton_inverse(a: np.ndarray) -> np.ndarray:
    # b <- b (2 - a b) doubles the number of correct terms per pass
    n = a.shape[0]
    b = np.array([1.0 / a[0]])
    m = 1
    while m < n:
        m = min(2 * m, n)
        ab = fftconvolve(a[:m], b)[:m]
        ab[0] -= 1.0
        corr = fftconvolve(b, ab)[:m]
        nb = np.zeros(m)
        nb[: b.shape[0]] = b
        b = nb - corr
    return b


def count_compositions(k: int, p: int) -> int:
    return math.comb(k - 1, p - 1)


def _compositions(k: int):
    # a composition of k is determined by its set of cut points in {1..k-1}
    for r in range(k):
        for cuts in itertools.combinations(range(1, k), r):
            bounds = (0,) + cuts + (k,)
            yield tuple(bounds[i + 1] - bounds[i] for i in range(len(bounds) - 1))


def invert_coeffs_combinatorial(a, k_max: int) -> InverseSequence:
    """Inverse kernel by explicit enumeration of integer compositions.

    ``b_k = sum_p (-1)^p / a_0^(p+1) sum_{k_1+..+k_p = k} prod a_{k_i}``.
    Exponential cost; used only as an oracle for :func:`invert_coeffs`.
    """
    if k_max > COMBINATORIAL_K_MAX:
        raise ComplexityGuardError(
            f"k_max={k_max} exceeds the enumeration cap {COMBINATORIAL_K_MAX}"
        )
    v = _values(a)
    if v[0] == 0:
        raise NonInvertibleError("leading coefficient is zero, the kernel is not invertible")
    if k_max >= v.shape[0]:
        v = np.concatenate([v, np.zeros(k_max + 1 - v.shape[0])])
    a0 = float(v[0])
    b = np.zeros(k_max + 1)
    b[0] = 1.0 / a0
    for k in range(1, k_max + 1):
        by_parts = [0.0] * (k + 1)
        for comp in _compositions(k):
            prod = 1.0
            for part in comp:
                prod *= v[part]
            by_parts[len(comp)] += prod
        b[k] = sum((-1) ** p / a0 ** (p + 1) * by_parts[p] for p in range(1, k + 1))
    return InverseSequence(_frozen(b), "combinatorial", _decay_hint(a))


def exp_closed_form_b(C_a: float, lam: float, k: int) -> float:
    """``b_k = -C_a (1 - C_a)^(k-1) exp(-lam k)`` for the exponential kernel."""
    if int(k) != k or k <= 0:
        raise DomainError(f"closed form needs k >= 1, got {k}")
    if lam > 0 and exp_inverse_rate(C_a, lam) <= 0:
        warnings.warn(
            f"inverse kernel does not decay for C_a={C_a}, lambda={lam}",
            DivergentInverseWarning,
            stacklevel=2,
        )
    return -C_a * (1.0 - C_a) ** (k - 1) * math.exp(-lam * k)


def exp_closed_form_inverse(C_a: float, lam: float, K: int) -> InverseSequence:
    b = np.empty(K + 1)
    b[0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergentInverseWarning)
        for k in range(1, K + 1):
            b[k] = exp_closed_form_b(C_a, lam, k)
    return InverseSequence(_frozen(b), "closed_form_exp", exp_inverse_rate(C_a, lam))


def convolution_residual(a, b) -> float:
    """Largest deviation of ``a * b`` from the unit impulse over common indices."""
    av, bv = _values(a), _values(b)
    n = min(av.shape[0], bv.shape[0])
    if n > 2048:
        conv = fftconvolve(av[:n], bv[:n])[:n]
    else:
        conv = np.convolve(av[:n], bv[:n])[:n]
    conv[0] -= 1.0
    return float(np.max(np.abs(conv)))


def apply_T(a, w) -> np.ndarray:
    """Apply the Toeplitz operator of ``a`` to a past-indexed sequence.

    ``w[j]`` holds the value at time ``-j``. Output ``k`` equals
    ``sum_l a_l w[k + l]`` over the available support.
    """
    av = _values(a)
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    L = min(av.shape[0], n)
    out = np.zeros(w.shape)
    # correlation of w with a, truncated to indices present in w
    for l in range(L):
        out[: n - l] += av[l] * w[l:]
    return out


def estimate_decay_exponent(seq, k_min: int, k_max: int) -> SlopeFit:
    """Least-squares slope of ``log|seq[k]|`` against ``log(k+1)`` on ``[k_min, k_max]``.

    Exact zeros are dropped and counted in the result.
    """
    s = _values(seq)
    if not (1 <= k_min < k_max < s.shape[0]):
        raise DomainError(f"need 1 <= k_min < k_max < {s.shape[0]}, got [{k_min}, {k_max}]")
    k = np.arange(k_min, k_max + 1)
    y = np.abs(s[k_min : k_max + 1])
    keep = y > 0
    dropped = int(np.count_nonzero(~keep))
    if np.count_nonzero(keep) < 10:
        raise InsufficientDataError(
            f"only {int(np.count_nonzero(keep))} non-zero points in [{k_min}, {k_max}]"
        )
    x = np.log(k[keep] + 1.0)
    ly = np.log(y[keep])
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    return SlopeFit(
        float(slope),
        float(intercept),
        (int(k_min), int(k_max)),
        float(np.sqrt(np.mean(resid**2))),
        int(x.shape[0]),
        dropped,
    )


def log_convex_bound_check(a, b, rtol: float = 1e-12) -> BoundReport:
    """Check ``b_k <= 0`` and ``|b_k| <= b_0 a_k`` for a log-convex kernel.

    Violations are measured relative to ``b_0 a_k``; the check passes when both
    maxima are at most ``rtol``.
    """
    av, bv = _values(a), _values(b)
    if av[0] <= 0 or not check_log_convex(av):
        raise InapplicableError("kernel is not a positive log-convex sequence")
    n = min(av.shape[0], bv.shape[0])
    scale = bv[0] * av[1:n]
    bk = bv[1:n]
    with np.errstate(divide="ignore", invalid="ignore"):
        sign = np.where(scale > 0, np.maximum(bk, 0.0) / scale, np.where(bk > 0, np.inf, 0.0))
        excess = np.abs(bk) - scale
        bound = np.where(scale > 0, excess / scale, np.where(excess > 0, np.inf, 0.0))
    s = float(np.max(sign, initial=0.0))
    m = float(np.max(bound, initial=0.0))
    return BoundReport(s, max(m, 0.0), bool(s <= rtol and m <= rtol))
