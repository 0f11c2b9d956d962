"""Exact Gaussian pair samplers used by the coupling trials.

Every sampler returns a pair whose two marginals are exactly standard normal;
only the joint law is engineered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..dynamics import AffineMap
from ..errors import BudgetError, DomainError, InvariantError

FORWARD = "forward"
BACKWARD = "backward"
DIAGONAL = "diagonal"


@dataclass(frozen=True)
class HitDraw:
    z1: np.ndarray
    z2: np.ndarray
    branch: str
    p_forward: float
    p_backward: float


def _log_density_ratio(u: np.ndarray, v: np.ndarray, logdet: float) -> float:
    # log of exp(|u|^2/2 - |v|^2/2) |det J|
    return 0.5 * float(u @ u) - 0.5 * float(v @ v) + logdet


def hitting_probabilities(lam: AffineMap, x: np.ndarray) -> tuple[float, float]:
    """``(p_f, p_b)`` at the draw ``x`` for the map ``lam``."""
    fwd = lam(x)
    bwd = lam.inverse(x)
    lf = _log_density_ratio(x, fwd, lam.logabsdet)
    lb = _log_density_ratio(x, bwd, -lam.logabsdet)
    return 0.5 * math.exp(min(lf, 0.0)), 0.5 * math.exp(min(lb, 0.0))


def sample_hitting_pair(lam: AffineMap, dim: int, rng) -> HitDraw:
    """Couple two standard normals so that ``Z2 = lam(Z1)`` with positive probability.

    Draw ``X``; return ``(X, lam(X))`` with probability ``p_f(X)``, else
    ``(X, lam^{-1}(X))`` with probability ``p_b(X)``, else ``(X, X)``.
    The forward and backward pieces are mirror images of each other, which
    is what keeps the second marginal standard normal.
    """
    x = np.asarray(rng.standard_normal(dim), dtype=np.float64).reshape(dim)
    pf, pb = hitting_probabilities(lam, x)
    if pf + pb > 1.0 + 1e-12:
        raise InvariantError(f"p_f + p_b = {pf + pb:.17g} exceeds one")
    u = rng.random()
    if u < pf:
        return HitDraw(x, lam(x), FORWARD, pf, pb)
    if u < pf + pb:
        return HitDraw(x, lam.inverse(x), BACKWARD, pf, pb)
    return HitDraw(x, x.copy(), DIAGONAL, pf, pb)


def translation_stick_probability(a: float) -> float:
    """``P(U2 = U1 + a) = 2 Phi(-|a|/2)`` for the maximal translation coupling."""
    return float(2.0 * ndtr(-abs(a) / 2.0))


def translation_coupling_1d(a: float, b: float, rng) -> tuple[float, float, bool]:
    """Maximal coupling of ``N(0,1)`` with itself shifted by ``a``.

    ``U1 = X``; with probability ``min(1, phi(X + a) / phi(X))`` set
    ``U2 = X + a`` (stuck), otherwise ``U2 = -X``. Both marginals are
    standard normal and ``P(stuck) = 2 Phi(-|a|/2) >= 1 - |a|``.
    """
    if b < abs(a):
        raise DomainError(f"budget b={b} is smaller than |a|={abs(a)}")
    x = float(rng.standard_normal())
    if a == 0.0:
        return x, x, True
    u = rng.random()
    # log phi(x + a) - log phi(x)
    if math.log(u) < min(0.0, -a * x - 0.5 * a * a):
        return x, x + a, True
    return x, -x, False


def translation_coupling_1d_batch(a: float, b: float, n: int, rng):
    """``n`` independent draws of :func:`translation_coupling_1d`, vectorized."""
    if b < abs(a):
        raise DomainError(f"budget b={b} is smaller than |a|={abs(a)}")
    x = np.asarray(rng.standard_normal(n), dtype=np.float64)
    u = np.asarray(rng.random(n), dtype=np.float64)
    if a == 0.0:
        return x, x.copy(), np.ones(n, dtype=bool)
    stuck = np.log(u) < np.minimum(0.0, -a * x - 0.5 * a * a)
    return x, np.where(stuck, x + a, -x), stuck


def interval_coupling(g_target, b_budget: float, rng):
    """Couple two i.i.d. standard normal blocks so that ``xi1 - xi2 = g_target`` with high probability.

    Parameters
    ----------
    g_target : array, shape (T+1,) or (T+1, d)
        Required difference, one column per component.
    b_budget : float
        Per-component budget; must dominate every column norm.
    rng
        Object with ``standard_normal`` and ``random``.

    Returns
    -------
    xi1, xi2 : ndarray
        Blocks with the shape of ``g_target``.
    success : bool
        True iff every component hit its target exactly.
    """
    g = np.asarray(g_target, dtype=np.float64)
    squeeze = g.ndim == 1
    if squeeze:
        g = g[:, None]
    n, d = g.shape
    norms = np.sqrt(np.sum(g * g, axis=0))
    if np.any(norms > b_budget):
        raise BudgetError(f"drift norm {norms.max():.6g} exceeds budget {b_budget:.6g}")
    xi1 = np.empty((n, d))
    xi2 = np.empty((n, d))
    success = True
    for c in range(d):
        eps = np.asarray(rng.standard_normal(n), dtype=np.float64)
        if norms[c] == 0.0:
            xi1[:, c] = eps
            xi2[:, c] = eps
            continue
        u0 = g[:, c] / norms[c]
        # shared part: projection of eps onto the orthogonal complement of u0
        perp = eps - (eps @ u0) * u0
        # xi1 - xi2 = norm * u0 needs U2 = U1 - norm
        U1, U2, stuck = translation_coupling_1d(-norms[c], b_budget, rng)
        xi1[:, c] = U1 * u0 + perp
        xi2[:, c] = U2 * u0 + perp
        success = success and stuck
    if squeeze:
        return xi1[:, 0], xi2[:, 0], success
    return xi1, xi2, success
