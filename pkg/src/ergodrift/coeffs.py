"""Moving-average coefficient families and their covariance functions.

All sequences are stored normalized so that ``a[0] == 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import correlate

from .errors import DivergentInverseWarning, DomainError, TruncationError


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CoefficientSequence:
    """Truncated kernel ``a_0..a_K`` of a moving-average noise.

    Parameters
    ----------
    family : str
        One of ``"polynomial"``, ``"exponential"``, ``"fbm"``, ``"custom"``.
    values : ndarray
        Normalized coefficients, read-only.
    params : dict
        Family parameters (``rho``; ``C_a``, ``lam``; ``H``, ``h``).
    tail_exponent : float or None
        Decay exponent of the tail: ``rho`` for polynomial, ``lam`` for
        exponential, ``3/2 - H`` for fbm.
    raw_a0 : float
        Leading coefficient before normalization.
    flags : tuple of str
        Diagnostic flags, e.g. ``"inverse may diverge"``.
    """

    family: str
    values: np.ndarray
    params: dict = field(default_factory=dict)
    tail_exponent: Optional[float] = None
    raw_a0: float = 1.0
    flags: tuple = ()

    @property
    def K(self) -> int:
        return self.values.shape[0] - 1

    @property
    def sum_squares(self) -> float:
        return float(np.dot(self.values, self.values))

    @property
    def zeta(self) -> Optional[float]:
        """Decay rate of the inverse kernel for the exponential family."""
        if self.family != "exponential":
            return None
        return exp_inverse_rate(self.params["C_a"], self.params["lam"])

    def formula(self, k: np.ndarray) -> Optional[np.ndarray]:
        """Evaluate the family formula at arbitrary indices ``k >= 1``.

        Returns ``None`` for custom kernels. Used to bound the part of the
        kernel discarded by truncation.
        """
        k = np.asarray(k, dtype=np.float64)
        p = self.params
        if self.family == "polynomial":
            return (k + 1.0) ** (-p["rho"])
        if self.family == "exponential":
            return p["C_a"] * np.exp(-p["lam"] * k)
        if self.family == "fbm":
            e = p["H"] - 0.5
            return ((k + 0.5) ** e - (k - 0.5) ** e) / (2.0 ** (-e))
        return None

    def tail_abs_sum(self, k_from: int, k_to: int) -> float:
        """Sum of ``|a_k|`` for ``k_from <= k <= k_to`` from the family formula."""
        if k_to < k_from:
            return 0.0
        total = 0.0
        for lo in range(k_from, k_to + 1, 1 << 20):
            hi = min(k_to, lo + (1 << 20) - 1)
            vals = self.formula(np.arange(lo, hi + 1))
            if vals is None:
                return math.nan
            total += float(np.sum(np.abs(vals)))
        return total

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CovarianceTable:
    values: np.ndarray
    truncation_error_bound: float

    def __getitem__(self, k):
        return self.values[k]


@dataclass(frozen=True)
class HypothesisReport:
    C_rho: float
    C_kappa: float
    rho: float
    kappa: float
    kappa_ok: bool
    passed: bool


def _check_K(K) -> int:
    if int(K) != K or K < 1:
        raise DomainError(f"truncation length must be a positive integer, got {K!r}")
    return int(K)


def make_poly_coeffs(rho: float, K: int) -> CoefficientSequence:
    """``a_k = (k+1)^(-rho)`` for ``0 <= k <= K``."""
    K = _check_K(K)
    if not rho > 0.5:
        raise DomainError(f"rho must exceed 1/2 for square summability, got {rho}")
    k = np.arange(K + 1, dtype=np.float64)
    return CoefficientSequence(
        "polynomial", _frozen((k + 1.0) ** (-rho)), {"rho": float(rho)}, float(rho)
    )


def exp_inverse_rate(C_a: float, lam: float) -> float:
    """``lam - ln|1 - C_a|``; infinite when ``C_a == 1``."""
    if C_a == 1.0:
        return math.inf
    return lam - math.log(abs(1.0 - C_a))


def make_exp_coeffs(C_a: float, lam: float, K: int) -> CoefficientSequence:
    """``a_0 = 1`` and ``a_k = C_a exp(-lam k)``."""
    K = _check_K(K)
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    k = np.arange(K + 1, dtype=np.float64)
    vals = C_a * np.exp(-lam * k)
    vals[0] = 1.0
    flags = ()
    if exp_inverse_rate(C_a, lam) <= 0:
        flags = ("inverse may diverge",)
        warnings.warn(
            f"zeta = lambda - ln|1 - C_a| <= 0 for C_a={C_a}, lambda={lam}",
            DivergentInverseWarning,
            stacklevel=2,
        )
    return CoefficientSequence(
        "exponential", _frozen(vals), {"C_a": float(C_a), "lam": float(lam)}, float(lam), 1.0, flags
    )


def fbm_kappa(H: float) -> float:
    return math.sqrt(math.sin(math.pi * H) * math.gamma(2 * H + 1)) / math.gamma(H + 0.5)


def make_fbm_coeffs(H: float, h: float, K: int) -> CoefficientSequence:
    """Kernel of the increments of fractional Brownian motion sampled with step ``h``."""
    K = _check_K(K)
    if not 0.0 < H < 1.0:
        raise DomainError(f"Hurst parameter must lie in (0, 1), got {H}")
    if not h > 0:
        raise DomainError(f"step must be positive, got {h}")
    scale = h**H * fbm_kappa(H)
    e = H - 0.5
    raw_a0 = scale * 2.0 ** (-e)
    k = np.arange(1, K + 1, dtype=np.float64)
    raw = scale * ((k + 0.5) ** e - (k - 0.5) ** e)
    vals = np.empty(K + 1)
    vals[0] = 1.0
    vals[1:] = raw / raw_a0
    return CoefficientSequence(
        "fbm", _frozen(vals), {"H": float(H), "h": float(h)}, 1.5 - H, raw_a0
    )


def make_custom_coeffs(values) -> CoefficientSequence:
    """Wrap user supplied coefficients, normalizing by the leading one."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 2:
        raise DomainError("custom kernel needs at least two coefficients")
    if not np.all(np.isfinite(v)):
        raise DomainError("custom kernel has non-finite entries")
    if v[0] == 0:
        raise DomainError("custom kernel must have a nonzero leading coefficient")
    return CoefficientSequence("custom", _frozen(v / v[0]), {}, None, float(v[0]))


def make_coeffs(family: str, K: int, **params) -> CoefficientSequence:
    family = {"poly": "polynomial", "exp": "exponential"}.get(family, family)
    if family == "polynomial":
        return make_poly_coeffs(params["rho"], K)
    if family == "exponential":
        return make_exp_coeffs(params["C_a"], params["lam"], K)
    if family == "fbm":
        return make_fbm_coeffs(params["H"], params.get("h", 1.0), K)
    raise DomainError(f"unknown family {family!r}")


def _tail_sup_constant(a: CoefficientSequence) -> float:
    # sup_k |a_k| (k+1)^rho over stored indices
    k = np.arange(a.K + 1, dtype=np.float64)
    return float(np.max(np.abs(a.values) * (k + 1.0) ** a.tail_exponent))


def covariance(a: CoefficientSequence, k_max: int) -> CovarianceTable:
    """Autocovariance ``c(k) = sum_i a_i a_{k+i}`` of the noise for ``k <= k_max``."""
    if k_max < 0 or 2 * k_max > a.K:
        raise TruncationError(f"k_max={k_max} exceeds half the truncation length K={a.K}")
    v = a.values
    full = correlate(v, v, mode="full", method="fft" if a.K > 512 else "direct")
    c = np.array(full[a.K : a.K + k_max + 1])
    c[0] = float(np.dot(v, v))
    half = a.K / 2.0
    if a.family == "custom" or a.tail_exponent is None:
        bound = math.nan
    elif a.family == "exponential":
        lam = a.tail_exponent
        bound = a.params["C_a"] ** 2 * math.exp(-2 * lam * (half + 1)) / (-math.expm1(-2 * lam))
    else:
        rho = a.tail_exponent
        C = _tail_sup_constant(a)
        bound = C * C * half ** (1 - 2 * rho) / (2 * rho - 1)
    return CovarianceTable(_frozen(c), bound)


def check_hypothesis_poly(a: CoefficientSequence, rho: float, kappa: float) -> HypothesisReport:
    """Minimal constants of the polynomial decay hypothesis over the stored indices."""
    v = a.values
    k = np.arange(v.shape[0], dtype=np.float64)
    C_rho = float(np.max(np.abs(v) * (k + 1.0) ** rho))
    C_kappa = float(np.max(np.abs(v[:-1] - v[1:]) * (k[:-1] + 1.0) ** kappa))
    kappa_ok = bool(kappa >= rho + 1)
    ok = kappa_ok and rho > 0.5 and math.isfinite(C_rho) and math.isfinite(C_kappa)
    return HypothesisReport(C_rho, C_kappa, float(rho), float(kappa), kappa_ok, bool(ok))


def check_log_convex(a: CoefficientSequence, rtol: float = 1e-13) -> bool:
    """True iff the kernel is non-negative and ``a_k^2 <= a_{k-1} a_{k+1}``.

    ``rtol`` absorbs rounding in the products; exact power laws have a
    relative margin of order ``rho / k^2``, far above it for any practical K.
    """
    v = np.asarray(a.values if isinstance(a, CoefficientSequence) else a, dtype=np.float64)
    if np.any(v < 0):
        return False
    lhs = v[1:-1] ** 2
    rhs = v[:-2] * v[2:]
    return bool(np.all(lhs <= rhs * (1.0 + rtol)))


def write_coeffs_csv(path, values, header: str = "", column: str = "a_k") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write(f"k,{column}\n")
        for k, x in enumerate(np.asarray(values, dtype=np.float64)):
            fh.write(f"{k},{x:.17g}\n")


def read_coeffs_csv(path) -> np.ndarray:
    """Read a ``k,value`` CSV; comment lines start with ``#``."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, val = line.partition(",")
            if k.strip() == "k":
                continue
            rows.append((int(k), float(val)))
    if not rows:
        raise DomainError(f"no coefficients in {path}")
    rows.sort()
    if [r[0] for r in rows] != list(range(len(rows))):
        raise DomainError(f"indices in {path} must be 0..K without gaps")
    return np.array([r[1] for r in rows])
