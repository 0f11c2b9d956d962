"""Coupling configuration, Step-2 interval schedule and Step-3 waiting times."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class CouplingConfig:
    """Parameters of the three-step coupling.

    ``mode`` is ``"poly"`` (uses ``alpha``, ``rho``, ``beta``) or ``"exp"``
    (uses ``alpha``, ``lam``, ``zeta``). ``K`` is the admissibility radius,
    ``K1`` the Step-1 acceptance radius (defaults to ``K``), ``c2`` the base
    length of Step-2 intervals, and ``t_star``, ``varsigma``, ``theta`` shape
    the Step-3 waiting time.
    """

    mode: str = "poly"
    alpha: float = 0.8
    rho: Optional[float] = None
    beta: Optional[float] = None
    lam: Optional[float] = None
    zeta: Optional[float] = None
    K: float = 5.0
    c2: int = 4
    t_star: float = 10.0
    varsigma: float = 1.2
    theta: float = 1.0
    horizon: int = 10_000
    K1: Optional[float] = None
    eps: float = 0.01
    ck_max: float = 10.0
    c2_max: int = 1024
    escalate_after: int = 3
    n_check: Optional[int] = None
    x1_0: float = 1.0
    x2_0: float = -1.0

    def __post_init__(self):
        if self.mode == "poly":
            if self.rho is None or self.beta is None:
                raise DomainError("poly mode needs rho and beta")
            lo = max(0.5, 1.5 - self.beta)
            if not self.alpha > lo:
                raise DomainError(
                    f"violated: alpha > max(1/2, 3/2 - beta) (alpha={self.alpha}, bound={lo})"
                )
            if not self.alpha < self.rho:
                raise DomainError(f"violated: alpha < rho (alpha={self.alpha}, rho={self.rho})")
            if not self.theta > 1.0 / (2.0 * (self.rho - self.alpha)):
                raise DomainError(
                    f"violated: theta > 1/(2(rho - alpha)) (theta={self.theta}, "
                    f"bound={1 / (2 * (self.rho - self.alpha)):.6g})"
                )
            if self.eps < 0 or (self.eps == 0 and (self.alpha == 1.0 or self.beta == 1.0)):
                raise DomainError("eps = 0 is only allowed when neither alpha nor beta equals 1")
            if self.alpha_tilde <= 0:
                raise DomainError(f"budget exponent {self.alpha_tilde:.6g} must be positive")
        elif self.mode == "exp":
            if self.lam is None:
                raise DomainError("exp mode needs lam")
            zeta = math.inf if self.zeta is None else self.zeta
            if not 0 < self.alpha < self.lam:
                raise DomainError(f"violated: 0 < alpha < lambda (alpha={self.alpha}, lambda={self.lam})")
            if self.alpha == zeta:
                raise DomainError(f"violated: alpha != zeta (alpha={self.alpha})")
            if not self.theta > 0:
                raise DomainError(f"violated: theta > 0 (theta={self.theta})")
        else:
            raise DomainError(f"unknown mode {self.mode!r}")
        if int(self.c2) != self.c2 or self.c2 < 2:
            raise DomainError(f"c2 must be an integer >= 2, got {self.c2}")
        if not self.varsigma > 1:
            raise DomainError(f"varsigma must exceed 1, got {self.varsigma}")
        if not self.t_star > 0:
            raise DomainError(f"t_star must be positive, got {self.t_star}")
        if not self.K > 0:
            raise DomainError(f"K must be positive, got {self.K}")
        if self.horizon < 0:
            raise DomainError("horizon must be non-negative")

    @property
    def k1(self) -> float:
        return self.K if self.K1 is None else self.K1

    @property
    def alpha_tilde(self) -> float:
        """Decay exponent of the Step-2 budgets ``2^(-alpha_tilde * ell)``."""
        if self.mode == "poly":
            m = min(self.alpha, self.beta, self.alpha + self.beta - 1.0)
            return m - 0.5 - self.eps
        zeta = math.inf if self.zeta is None else self.zeta
        return min(self.alpha, zeta)

    def speed(self, n):
        """Admissibility envelope ``v_n``."""
        n = np.asarray(n, dtype=np.float64)
        if self.mode == "poly":
            return (n + 1.0) ** (-self.alpha)
        return np.exp(-self.alpha * n)

    def budget(self, ell: int) -> float:
        return 2.0 ** (-self.alpha_tilde * ell)

    def replace(self, **kw) -> "CouplingConfig":
        d = asdict(self)
        d.update(kw)
        return CouplingConfig(**d)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _s(ell: int, mode: str) -> int:
    return 2**ell if mode == "poly" else ell


def interval_schedule(ell: int, c2: int, tau: int, mode: str) -> tuple[int, int]:
    """Times ``[start, end]`` of the ``ell``-th Step-2 interval after a hit attempt at ``tau``."""
    if ell < 0:
        raise DomainError("ell must be non-negative")
    if ell == 0:
        return tau + 1, tau + 1
    if ell == 1:
        return tau + 2, tau + 2 * c2 - 1
    return tau + c2 * _s(ell, mode), tau + c2 * _s(ell + 1, mode) - 1


def covering_interval(ell: int, c2: int, tau: int, mode: str) -> tuple[int, int]:
    """Like :func:`interval_schedule` but the first interval is stretched up to the second.

    In poly mode the raw schedule leaves ``[tau + 2 c2, tau + 4 c2 - 1]``
    uncovered; the engine needs consecutive intervals to tile time.
    """
    if ell == 1:
        return tau + 2, interval_schedule(2, c2, tau, mode)[0] - 1
    return interval_schedule(ell, c2, tau, mode)


def step3_duration(j: int, ell_star: int, cfg: CouplingConfig) -> int:
    """Waiting time with identical innovations after the ``j``-th failed trial."""
    if j < 1 or ell_star < 0:
        raise DomainError("need j >= 1 and ell_star >= 0")
    if cfg.mode == "poly":
        t = cfg.t_star * cfg.varsigma**j * 2.0 ** (cfg.theta * ell_star)
    else:
        t = cfg.t_star + cfg.varsigma**j + cfg.theta * ell_star
    # guard against ceil(320.00000000000006)
    return max(1, math.ceil(t - 1e-9 * max(1.0, t)))
