"""Monte Carlo estimation of the survival function ``P(tau_inf > n)``."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from ..coeffs import CoefficientSequence
from ..dynamics import EulerModel
from ..errors import DomainError
from ..toeplitz import SlopeFit, estimate_decay_exponent
from .engine import replay_paths, run_coupling
from .schedule import CouplingConfig

P_BAND = (0.02, 0.5)
MIN_WINDOW_EVENTS = 20


@dataclass(frozen=True)
class ReplicaSummary:
    """What a worker sends back for one replica."""

    stream: int
    tau_infinity: Optional[int]
    trials: int
    bookkeeping_residual: float
    coalesced_gap_max: float
    hit_residual_max: float
    step2_gap_max: float
    budget_violations: int
    step2_attempts: int
    step2_within_budget: int
    cond1_after_step3: int
    cond1_after_step3_pass: int
    replay_gap_max: float = math.nan
    replay_mismatch: float = math.nan


@dataclass
class TailEstimate:
    """Empirical survival curve of the coupling time with Wilson 95% bands."""

    n_grid: np.ndarray
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    replicas: int
    horizon: int
    tau: list = field(repr=False, default_factory=list)
    fit: Optional[SlopeFit] = None
    fit_reliable: bool = False
    fit_window: Optional[tuple] = None
    summaries: list = field(repr=False, default_factory=list)

    @property
    def coalesced_fraction(self) -> float:
        return sum(t is not None for t in self.tau) / max(self.replicas, 1)

    @property
    def decay_exponent(self) -> Optional[float]:
        return None if self.fit is None else -self.fit.slope

    def diagnostics(self) -> dict:
        s = self.summaries
        att = sum(x.step2_attempts for x in s)
        c1 = sum(x.cond1_after_step3 for x in s)
        return {
            "replicas": self.replicas,
            "coalesced_fraction": self.coalesced_fraction,
            "bookkeeping_residual_max": max((x.bookkeeping_residual for x in s), default=0.0),
            "coalesced_gap_max": max((x.coalesced_gap_max for x in s), default=0.0),
            "hit_residual_max": max((x.hit_residual_max for x in s), default=0.0),
            "step2_gap_max": max((x.step2_gap_max for x in s), default=0.0),
            "step2_budget_fraction": (sum(x.step2_within_budget for x in s) / att) if att else 1.0,
            "step2_attempts": att,
            "cond1_after_step3_fraction": (sum(x.cond1_after_step3_pass for x in s) / c1) if c1 else 1.0,
            "cond1_after_step3_count": c1,
            "replay_gap_max": max((x.replay_gap_max for x in s), default=math.nan),
            "replay_mismatch_max": max((x.replay_mismatch for x in s), default=math.nan),
            "decay_exponent": self.decay_exponent,
            "fit_reliable": self.fit_reliable,
        }


def _replay(model, a, cfg, trace) -> tuple[float, float]:
    # independent recompute: gap after tau_inf and distance to the engine's paths
    s = trace.system
    x1, x2 = replay_paths(model, a, s.xi1, s.xi2, cfg.x1_0, cfg.x2_0, s.history)
    mismatch = float(max(np.max(np.abs(x1 - s.x1)), np.max(np.abs(x2 - s.x2))))
    gap = 0.0
    if trace.tau_infinity is not None:
        gap = float(np.max(np.abs(x1[trace.tau_infinity :] - x2[trace.tau_infinity :])))
    return gap, mismatch


def _summarize(trace, stream: int, replay=(math.nan, math.nan)) -> ReplicaSummary:
    after = [t for t in trace.trials if t.after_step3]
    return ReplicaSummary(
        stream, trace.tau_infinity, len(trace.trials), trace.bookkeeping_residual,
        trace.coalesced_gap_max, trace.hit_residual_max, trace.step2_gap_max,
        trace.budget_violations, len(trace.step2_norms),
        sum(1 for _, nrm, b in trace.step2_norms if nrm <= b),
        len(after), sum(1 for t in after if t.cond1_ratio <= 1.0), *replay,
    )


def _run_chunk(args) -> list:
    model, a, cfg, seed, streams, history, replay = args
    out = []
    for s in streams:
        tr = run_coupling(model, a, cfg, seed, s, history, keep_system=replay)
        out.append(_summarize(tr, s, _replay(model, a, cfg, tr) if replay else (math.nan, math.nan)))
    return out


def survival_curve(tau: Sequence[Optional[int]], n_grid: np.ndarray) -> np.ndarray:
    """``P(tau > n)`` with ``None`` counted as larger than every grid point."""
    finite = np.sort(np.array([t for t in tau if t is not None], dtype=np.int64))
    R = len(tau)
    not_reached = R - finite.shape[0]
    # number of finite tau <= n
    le = np.searchsorted(finite, n_grid, side="right")
    return (finite.shape[0] - le + not_reached) / R


def wilson_band(p_hat: np.ndarray, R: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.empty_like(p_hat)
    hi = np.empty_like(p_hat)
    for i, p in enumerate(p_hat):
        ci = binomtest(int(round(p * R)), R).proportion_ci(confidence_level=0.95, method="wilson")
        lo[i], hi[i] = min(ci.low, p), max(ci.high, p)
    return lo, hi


def default_grid(horizon: int, points: int = 60) -> np.ndarray:
    if horizon <= 0:
        return np.array([0], dtype=np.int64)
    g = np.unique(np.concatenate([[0], np.geomspace(1, horizon, points).astype(np.int64), [horizon]]))
    return g


def _fit_tail(tau, horizon: int):
    """Log-log slope of the survival curve over the largest decade where it lies in the band."""
    if horizon < 10:
        return None, False, None
    n_all = np.arange(horizon + 1)
    p_all = survival_curve(tau, n_all)
    inside = np.flatnonzero((p_all > P_BAND[0]) & (p_all < P_BAND[1]) & (n_all >= 1))
    if inside.size == 0:
        return None, False, None
    n_hi = int(n_all[inside[-1]])
    n_lo = max(int(n_all[inside[0]]), n_hi // 10, 1)
    if n_hi <= n_lo:
        return None, False, (n_lo, n_hi)
    events = sum(1 for t in tau if t is not None and n_lo < t <= n_hi)
    # estimate_decay_exponent regresses on log(k + 1); seq[k] = p(k + 1) makes that log n
    seq = p_all[1:]
    try:
        fit = estimate_decay_exponent(seq, max(n_lo - 1, 1), n_hi - 1)
    except DomainError:
        return None, False, (n_lo, n_hi)
    return fit, events >= MIN_WINDOW_EVENTS, (n_lo, n_hi)


def merge_summaries(parts: Sequence[Sequence[ReplicaSummary]]) -> list:
    """Order-independent merge of replica summaries."""
    out = [s for part in parts for s in part]
    out.sort(key=lambda s: s.stream)
    return out


def tail_from_summaries(summaries: Sequence[ReplicaSummary], horizon: int, n_grid=None) -> TailEstimate:
    tau = [s.tau_infinity for s in summaries]
    R = len(tau)
    grid = default_grid(horizon) if n_grid is None else np.asarray(n_grid, dtype=np.int64)
    p = survival_curve(tau, grid)
    lo, hi = wilson_band(p, R)
    fit, reliable, window = _fit_tail(tau, horizon)
    return TailEstimate(grid, p, lo, hi, R, horizon, tau, fit, reliable, window, list(summaries))


def estimate_tv_tail(model: EulerModel, a: CoefficientSequence, cfg: CouplingConfig, replicas: int,
                     horizon: Optional[int] = None, n_grid=None, seed: int = 0, workers: int = 1,
                     history: Optional[int] = None, replay: bool = False) -> TailEstimate:
    """Run independent coupled replicas and estimate ``P(tau_inf > n)``.

    Replica ``r`` uses stream ``r + 1`` of ``seed``, so results do not depend
    on ``workers``. With ``replay`` every trajectory is recomputed from its
    stored innovations by :func:`replay_paths` and the post-coalescence gap
    of the recomputed paths is kept in the summaries.
    """
    if replicas < 100:
        raise DomainError(f"need at least 100 replicas, got {replicas}")
    if horizon is not None:
        cfg = cfg.replace(horizon=int(horizon))
    streams = list(range(1, replicas + 1))
    workers = max(1, min(int(workers), os.cpu_count() or 1, replicas))
    if workers == 1:
        parts = [_run_chunk((model, a, cfg, seed, streams, history, replay))]
    else:
        chunks = [streams[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, [(model, a, cfg, seed, c, history, replay) for c in chunks]))
    return tail_from_summaries(merge_summaries(parts), cfg.horizon, n_grid)
