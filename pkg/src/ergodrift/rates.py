"""Polynomial convergence rates and the convolution bound behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .errors import DomainError

GRID_POINTS = 10_000
MARGIN = 1e-9


def _objective(alpha: float, beta: float, rho: float) -> float:
    return min(1.0, 2.0 * (rho - alpha)) * (min(alpha, beta, alpha + beta - 1.0) - 0.5)


def _check_rate_domain(beta: float, rho: float) -> tuple[float, float]:
    if not (rho > 0.5 and beta > 0.5 and rho + beta > 1.5):
        raise DomainError(f"need rho, beta > 1/2 and rho + beta > 3/2, got beta={beta}, rho={rho}")
    lo = max(0.5, 1.5 - beta)
    if not rho > lo:
        raise DomainError(f"empty alpha interval: rho={rho} <= max(1/2, 3/2 - beta)={lo}")
    return lo, rho


def rate_v(beta: float, rho: float, tol: float = 1e-6) -> tuple[float, float]:
    """Supremum over admissible ``alpha`` of the rate objective.

    ``v(beta, rho) = sup_{alpha in (max(1/2, 3/2 - beta), rho)}
    min(1, 2(rho - alpha)) (min(alpha, beta, alpha + beta - 1) - 1/2)``.

    Returns ``(value, argmax_alpha)``. A dense grid locates the best bracket
    and a bounded scalar search refines inside it.
    """
    lo, hi = _check_rate_domain(beta, rho)
    lo, hi = lo + MARGIN, hi - MARGIN
    grid = np.linspace(lo, hi, GRID_POINTS)
    m = np.minimum(np.minimum(grid, beta), grid + beta - 1.0) - 0.5
    vals = np.minimum(1.0, 2.0 * (rho - grid)) * m
    i = int(np.argmax(vals))
    best_a, best_v = float(grid[i]), float(vals[i])
    a0 = float(grid[max(i - 1, 0)])
    a1 = float(grid[min(i + 1, GRID_POINTS - 1)])
    if a1 > a0:
        res = minimize_scalar(
            lambda x: -_objective(x, beta, rho), bounds=(a0, a1), method="bounded",
            options={"xatol": min(tol, 1e-10)},
        )
        if -res.fun > best_v:
            best_a, best_v = float(res.x), float(-res.fun)
    return best_v, best_a


def rate_v_closed_poly(rho: float) -> float:
    """Closed form of the rate when ``beta = rho``."""
    if not rho > 0.75:
        raise DomainError(f"closed form needs rho > 3/4, got {rho}")
    if rho <= 1.0:
        return 2.0 * (rho - 0.75) ** 2
    return 0.5 * (rho - 0.5) ** 2


def rate_v_fbm(H: float) -> float:
    """Rate for fractional noise with Hurst parameter ``H < 1/2``."""
    if not 0.0 < H < 0.5:
        raise DomainError(f"H must lie in (0, 1/2), got {H}")
    if H <= 0.25:
        return H * (1.0 - 2.0 * H)
    return 0.125


@dataclass(frozen=True)
class ConvolutionReport:
    """Growth diagnostics of ``C(n) = S(n) (n+1)^(m - eps)``, ``m = min(alpha, beta, alpha + beta - 1)``.

    ``head_max`` is the maximum over ``n < n_max / 10``, ``tail_max`` over the
    last decade. The bound stabilizes when the last decade adds less than 5%.
    """

    C_star: float
    head_max: float
    tail_max: float
    growth_ratio: float
    n_max: int
    stabilized: bool
    ns: np.ndarray
    C_values: np.ndarray

    @property
    def passed(self) -> bool:
        return self.stabilized


def convolution_sum(alpha: float, beta: float, n: int) -> float:
    """``S(n) = sum_{k=0}^n (k+1)^(-beta) (n+1-k)^(-alpha)``."""
    return _kernels.conv_sum(beta, alpha, n)


def _log_grid(n_max: int, per_decade: int) -> np.ndarray:
    pts = int(per_decade * max(math.log10(n_max + 1), 1)) + 1
    ns = np.unique(np.concatenate([np.arange(min(100, n_max + 1)), np.geomspace(1, n_max, pts).astype(np.int64), [n_max]]))
    return ns.astype(np.int64)


def convolution_bound_check(alpha: float, beta: float, n_max: int = 30_000_000, eps: float = 0.0,
                            tol: float = 0.05, per_decade: int = 24) -> ConvolutionReport:
    """Numerically test whether ``S(n) <= C (n+1)^(-m + eps)`` with a bounded constant.

    ``S(n)`` is summed exactly at every point of a logarithmic grid. The
    check passes iff the maximum of ``C(n)`` over the last decade exceeds
    the maximum before it by at most ``tol`` (relative); a logarithmically
    growing ``C(n)`` gains about ``ln 10 / ln n_max`` per decade and fails.
    """
    if not (alpha > 0 and beta > 0 and alpha + beta > 1):
        raise DomainError(f"need alpha, beta > 0 and alpha + beta > 1, got ({alpha}, {beta})")
    if n_max < 100:
        raise DomainError("n_max must be at least 100")
    m = min(alpha, beta, alpha + beta - 1.0)
    k = np.arange(n_max + 1, dtype=np.float64) + 1.0
    # (k+1)^(-beta) and (n+1-k)^(-alpha) = (j+1)^(-alpha) with j = n - k
    A = k ** (-beta)
    B = k ** (-alpha)
    ns = _log_grid(n_max, per_decade)
    S = _kernels.conv_sum_grid(A, B, ns)
    del A, B
    C = S * (ns + 1.0) ** (m - eps)
    split = n_max // 10
    head = float(C[ns < split].max())
    tail = float(C[ns >= split].max())
    ratio = tail / head
    return ConvolutionReport(float(C.max()), head, tail, ratio, int(n_max), bool(ratio <= 1.0 + tol), ns, C)
