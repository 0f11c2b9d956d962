"""Stationary Gaussian moving-average noise with an explicit finite history."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .coeffs import CoefficientSequence
from .errors import DomainError, InsufficientDataError
from .rng import CounterStream


@dataclass(frozen=True)
class NoisePath:
    """Innovations and noise on a window ``1..T`` preceded by ``history_len`` past innovations.

    ``innovations[i]`` is the innovation at time ``i - history_len + 1`` and
    ``deltas[n - 1]`` is the noise at time ``n``. ``variance_deficit[n - 1]``
    is the variance of the noise at time ``n`` lost to the finite history.
    """

    innovations: np.ndarray
    deltas: np.ndarray
    history_len: int
    dim: int
    seed_descriptor: tuple
    variance_deficit: np.ndarray

    @property
    def T(self) -> int:
        return self.deltas.shape[0]


def _ro(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    x.setflags(write=False)
    return x


def _deficit(a: np.ndarray, T: int, H_len: int) -> np.ndarray:
    # variance of the kernel terms a_k, k >= n + H_len, that see no innovation
    sq = a * a
    tail = np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]])
    idx = np.minimum(np.arange(1, T + 1) + H_len, a.shape[0])
    return tail[idx]


def path_from_innovations(a, innovations, history_len: int, seed_descriptor=(None, None)) -> NoisePath:
    """Build a :class:`NoisePath` from given innovations (shape ``(H_len + T, d)``)."""
    av = np.asarray(a.values if hasattr(a, "values") else a, dtype=np.float64)
    xi = np.asarray(innovations, dtype=np.float64)
    if xi.ndim == 1:
        xi = xi[:, None]
    T = xi.shape[0] - history_len
    if T < 1 or history_len < 0:
        raise DomainError("need at least one time step after the history")
    deltas = _kernels.moving_average(av, xi, history_len, history_len + T)
    return NoisePath(
        _ro(xi), _ro(deltas), int(history_len), int(xi.shape[1]), tuple(seed_descriptor),
        _ro(_deficit(av, T, history_len)),
    )


def sample_path(
    a: CoefficientSequence, d: int, T: int, H_len: int, seed: int, stream: int = 0
) -> NoisePath:
    """Draw a noise path with ``H_len`` history innovations and ``T`` window steps."""
    if T < 1 or H_len < 0 or d < 1:
        raise DomainError(f"need T >= 1, H_len >= 0, d >= 1; got T={T}, H_len={H_len}, d={d}")
    rng = CounterStream(seed, stream)
    xi = rng.standard_normal((H_len + T, d))
    return path_from_innovations(a, xi, H_len, (int(seed), int(stream)))


def empirical_covariance(paths: Sequence[NoisePath], lag: int) -> tuple[float, float]:
    """Cross-replica mean of ``Delta_1 . Delta_{1+lag}`` (component averaged) and its standard error."""
    paths = list(paths)
    if len(paths) < 2:
        raise InsufficientDataError("need at least two paths")
    if lag < 0 or lag >= paths[0].T:
        raise DomainError(f"lag must lie in [0, T), got {lag}")
    vals = np.array([np.mean(p.deltas[0] * p.deltas[lag]) for p in paths])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.shape[0]))


def reconstruct_innovations(b, deltas) -> np.ndarray:
    """Recover innovations from zero-history noise via ``xi_n = sum_{k<n} b_k Delta_{n-k}``."""
    bv = np.asarray(b.values if hasattr(b, "values") else b, dtype=np.float64)
    dl = np.asarray(deltas, dtype=np.float64)
    squeeze = dl.ndim == 1
    if squeeze:
        dl = dl[:, None]
    out = _kernels.moving_average(bv, dl, 0, dl.shape[0])
    return out[:, 0] if squeeze else out
