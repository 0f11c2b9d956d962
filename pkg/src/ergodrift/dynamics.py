"""Euler-scheme dynamics ``x -> x + h b(x) + sigma(x) w`` and the affine hitting map."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConditioningError, DomainError
from .rng import CounterStream

COND_MAX = 1e12


class LinearDrift:
    """``b(x) = -kappa x``."""

    def __init__(self, kappa: float):
        self.kappa = float(kappa)

    def __call__(self, x):
        return -self.kappa * np.asarray(x, dtype=np.float64)


class ConstantDiffusion:
    def __init__(self, sigma: float, dim: int):
        self.matrix = float(sigma) * np.eye(dim)

    def __call__(self, x):
        return self.matrix


class ConstantDiffusionInverse:
    def __init__(self, sigma: float, dim: int):
        self.matrix = np.eye(dim) / float(sigma)

    def __call__(self, x):
        return self.matrix


class BoundedSmoothDiffusion:
    """``sigma(x) = s (1 + 0.5 |x|^2 / (1 + |x|^2)) I``: bounded, smooth, uniformly elliptic."""

    def __init__(self, sigma: float, dim: int, inverse: bool = False):
        self.sigma = float(sigma)
        self.dim = dim
        self.inverse = inverse

    def __call__(self, x):
        r2 = float(np.dot(x, x))
        s = self.sigma * (1.0 + 0.5 * r2 / (1.0 + r2))
        return np.eye(self.dim) * (1.0 / s if self.inverse else s)


@dataclass(frozen=True)
class EulerModel:
    """Euler scheme of a diffusion driven by the moving-average noise.

    Parameters
    ----------
    drift, diffusion, diffusion_inverse : callable
        ``b``, ``sigma`` and ``sigma^{-1}``; matrices are ``(dim, dim)``.
    h : float
        Step size.
    dim : int
        State dimension.
    lyapunov_params : tuple or None
        ``(alpha_tilde, beta_tilde, C)``: ``<x, b(x)> <= beta_tilde - alpha_tilde |x|^2``
        and ``|b(x)| <= C (1 + |x|)``.
    theorem_compliant : bool
        If true, construction fails unless ``h`` satisfies the step bound.
    linear_drift, constant_diffusion : ndarray or None
        When both are set, ``b(x) = linear_drift @ x`` and ``sigma`` is constant;
        the coupling engine then advances whole blocks in compiled code.
    """

    drift: Callable
    diffusion: Callable
    diffusion_inverse: Callable
    h: float
    dim: int
    lyapunov_params: Optional[tuple] = None
    theorem_compliant: bool = False
    linear_drift: Optional[np.ndarray] = None
    constant_diffusion: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError(f"step must be positive, got {self.h}")
        if self.dim < 1:
            raise DomainError(f"dimension must be at least 1, got {self.dim}")
        if self.theorem_compliant:
            if self.lyapunov_params is None:
                raise DomainError("theorem-compliant mode needs Lyapunov parameters")
            alpha_t, _, C = self.lyapunov_params
            if not check_h_bound(alpha_t, C, self.h):
                raise DomainError(
                    f"h={self.h} violates the step bound {h_threshold(alpha_t, C):.6g}"
                )
        pts = CounterStream(12345, 0).standard_normal((4, self.dim)) * 3.0
        for x in pts:
            err = np.max(np.abs(self.sigma(x) @ self.sigma_inv(x) - np.eye(self.dim)))
            if err > 1e-10:
                raise DomainError(f"diffusion and its inverse disagree by {err:.3g}")

    def sigma(self, x) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.diffusion(x), dtype=np.float64))

    def sigma_inv(self, x) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.diffusion_inverse(x), dtype=np.float64))

    def b(self, x) -> np.ndarray:
        return np.asarray(self.drift(x), dtype=np.float64).reshape(self.dim)

    @property
    def is_affine(self) -> bool:
        return self.linear_drift is not None and self.constant_diffusion is not None


def ou_model(
    kappa: float = 1.0,
    h: float = 0.1,
    dim: int = 1,
    sigma_kind: str = "const",
    sigma: float = 1.0,
    theorem_compliant: bool = True,
) -> EulerModel:
    """Ornstein-Uhlenbeck drift ``-kappa x`` with constant or bounded smooth diffusion."""
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    # <x, -kappa x> = -kappa |x|^2 and |kappa x| <= kappa (1 + |x|)
    lyap = (float(kappa), 0.0, float(kappa))
    if sigma_kind == "const":
        return EulerModel(
            LinearDrift(kappa), ConstantDiffusion(sigma, dim), ConstantDiffusionInverse(sigma, dim),
            float(h), int(dim), lyap, theorem_compliant,
            linear_drift=-float(kappa) * np.eye(dim), constant_diffusion=float(sigma) * np.eye(dim),
        )
    if sigma_kind == "bounded-smooth":
        return EulerModel(
            LinearDrift(kappa), BoundedSmoothDiffusion(sigma, dim),
            BoundedSmoothDiffusion(sigma, dim, inverse=True),
            float(h), int(dim), lyap, theorem_compliant,
        )
    raise DomainError(f"unknown sigma kind {sigma_kind!r}")


def euler_map(model: EulerModel, x, w) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(model.dim)
    w = np.asarray(w, dtype=np.float64).reshape(model.dim)
    return x + model.h * model.b(x) + model.sigma(x) @ w


def h_threshold(alpha_tilde: float, C: float) -> float:
    if not (alpha_tilde > 0 and C > 0):
        raise DomainError("alpha_tilde and C must be positive")
    return min(math.sqrt(1.0 + alpha_tilde / (2.0 * C * C)) - 1.0, 1.0 / alpha_tilde)


def check_h_bound(alpha_tilde: float, C: float, h: float) -> bool:
    """``0 < h < min(sqrt(1 + alpha_tilde / (2 C^2)) - 1, 1 / alpha_tilde)``."""
    return bool(0 < h < h_threshold(alpha_tilde, C))


@dataclass(frozen=True)
class SampleSpec:
    n_points: int = 10_000
    x_radius: float = 1e3
    w_radius: float = 1e2
    seed: int = 0


@dataclass(frozen=True)
class LyapunovReport:
    max_excess: float
    worst_x: np.ndarray
    worst_w: np.ndarray
    passed: bool


def _ball_cloud(rng: CounterStream, n: int, dim: int, radius: float) -> np.ndarray:
    # radii spread log-uniformly so both small and large norms are probed
    dirs = rng.standard_normal((n, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = radius * 10.0 ** (-6.0 * rng.random(n))
    return dirs * r[:, None]


def check_lyapunov_sample(model: EulerModel, V: Callable, gamma: float, C: float, sample_spec=None) -> LyapunovReport:
    """Largest ``V(F(x, w)) - gamma V(x) - C (1 + |w|)`` over a random cloud; passes iff <= 0."""
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    spec = sample_spec if sample_spec is not None else SampleSpec()
    if isinstance(spec, dict):
        spec = SampleSpec(**spec)
    rng = CounterStream(spec.seed, 1)
    xs = _ball_cloud(rng, spec.n_points, model.dim, spec.x_radius)
    ws = _ball_cloud(rng, spec.n_points, model.dim, spec.w_radius)
    worst = -math.inf
    wi = 0
    for i in range(spec.n_points):
        val = V(euler_map(model, xs[i], ws[i])) - gamma * V(xs[i]) - C * (1.0 + np.linalg.norm(ws[i]))
        if val > worst:
            worst, wi = float(val), i
    return LyapunovReport(worst, xs[wi], ws[wi], bool(worst <= 0))


@dataclass(frozen=True)
class HittingMapParams:
    """Positions ``x, x'`` and memory terms ``y, y'`` of the two copies at the hitting attempt."""

    x: np.ndarray
    x_prime: np.ndarray
    y: np.ndarray
    y_prime: np.ndarray


@dataclass(frozen=True)
class AffineMap:
    """``u -> A u + B`` with cached inverse."""

    A: np.ndarray
    B: np.ndarray
    A_inv: np.ndarray
    logabsdet: float

    def __call__(self, u) -> np.ndarray:
        return self.A @ np.asarray(u, dtype=np.float64) + self.B

    def inverse(self, v) -> np.ndarray:
        return self.A_inv @ (np.asarray(v, dtype=np.float64) - self.B)

    @property
    def is_translation(self) -> bool:
        return bool(np.array_equal(self.A, np.eye(self.A.shape[0])))

    @classmethod
    def translation(cls, offset) -> "AffineMap":
        B = np.atleast_1d(np.asarray(offset, dtype=np.float64))
        eye = np.eye(B.shape[0])
        return cls(eye, B, eye, 0.0)


def hitting_map(model: EulerModel, params: HittingMapParams) -> AffineMap:
    """The affine map ``Lambda`` with ``F(x, u + y) = F(x', Lambda(u) + y')`` for every ``u``."""
    d = model.dim
    x = np.asarray(params.x, dtype=np.float64).reshape(d)
    xp = np.asarray(params.x_prime, dtype=np.float64).reshape(d)
    y = np.asarray(params.y, dtype=np.float64).reshape(d)
    yp = np.asarray(params.y_prime, dtype=np.float64).reshape(d)
    sinv_p = model.sigma_inv(xp)
    A = sinv_p @ model.sigma(x)
    cond = np.linalg.cond(A)
    if not cond <= COND_MAX:
        raise ConditioningError(f"hitting map matrix has condition number {cond:.3g}")
    B = sinv_p @ (x - xp + model.h * (model.b(x) - model.b(xp))) + A @ y - yp
    _, logabsdet = np.linalg.slogdet(A)
    return AffineMap(A, B, np.linalg.inv(A), float(logabsdet))


def lambda_map(model: EulerModel, params: HittingMapParams, u) -> np.ndarray:
    return hitting_map(model, params)(u)


def lambda_jacobian_logdet(model: EulerModel, params: HittingMapParams) -> float:
    return hitting_map(model, params).logabsdet


def displacement_bound(model: EulerModel, radius: float, n_samples: int = 2000, seed: int = 0) -> float:
    """Empirical ``max |Lambda(u) - u|`` over random parameters and ``u`` with norms at most ``radius``."""
    rng = CounterStream(seed, 2)
    d = model.dim
    best = 0.0
    for _ in range(n_samples):
        pts = _ball_cloud(rng, 5, d, radius)
        lam = hitting_map(model, HittingMapParams(pts[0], pts[1], pts[2], pts[3]))
        best = max(best, float(np.linalg.norm(lam(pts[4]) - pts[4])))
    return best
