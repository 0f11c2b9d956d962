"""The three-step coupling of two copies driven by the same moving-average noise law.

Both copies share the innovations before time 0. A trial starts at a time
``tau`` where the pair is admissible:

* Step 1 tries to make ``X1`` and ``X2`` meet at ``tau + 1`` with the hitting
  pair sampler.
* Step 2 keeps them together on successive intervals by coupling the
  innovation blocks so that the noise increments agree, which forces the
  innovation difference to follow the successful drift.
* Step 3, after any failure, uses identical innovations for a waiting time
  that lets the memory of the failed attempt fade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import _kernels
from ..coeffs import CoefficientSequence
from ..dynamics import EulerModel, HittingMapParams, hitting_map
from ..errors import InvariantError
from ..rng import CounterStream
from .samplers import FORWARD, interval_coupling, sample_hitting_pair
from .schedule import CouplingConfig, covering_interval, step3_duration

PHASES = ("pre", "step1", "step2", "step3", "done")


@dataclass
class CoupledSystem:
    """Full state of a coupled pair over ``[-history + 1, horizon]``.

    Innovation arrays are indexed by ``pos(t) = t + history - 1``; ``g[n]``
    is ``xi1_{n+1} - xi2_{n+1}``; ``d1[t]``, ``d2[t]`` hold the noise at time
    ``t >= 1``; ``x1[t]``, ``x2[t]`` the positions.
    """

    a: np.ndarray
    dim: int
    history: int
    horizon: int
    xi1: np.ndarray
    xi2: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    g: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    n: int = 0
    j: int = 0
    phase: str = "pre"
    tau0: Optional[int] = None
    tau_list: list = field(default_factory=list)
    ell_star_list: list = field(default_factory=list)

    @classmethod
    def start(cls, a: np.ndarray, dim: int, horizon: int, history: int, x1_0, x2_0, past: np.ndarray):
        xi = np.zeros((history + horizon, dim))
        xi[:history] = past
        sys = cls(
            a=a, dim=dim, history=history, horizon=horizon,
            xi1=xi, xi2=xi.copy(),
            x1=np.zeros((horizon + 1, dim)), x2=np.zeros((horizon + 1, dim)),
            g=np.zeros((max(horizon, 1), dim)),
            d1=np.zeros((horizon + 1, dim)), d2=np.zeros((horizon + 1, dim)),
        )
        sys.x1[0] = x1_0
        sys.x2[0] = x2_0
        return sys

    def pos(self, t: int) -> int:
        return t + self.history - 1

    def memory(self, side: int, t: int) -> np.ndarray:
        """``sum_{k>=1} a_k xi_{t+1-k}`` for the given side."""
        xi = self.xi1 if side == 1 else self.xi2
        p = self.pos(t)
        L = min(self.a.shape[0] - 1, p + 1)
        if L <= 0:
            return np.zeros(self.dim)
        return self.a[1 : L + 1] @ xi[p : p - L if p - L >= 0 else None : -1]

    @property
    def f_history(self) -> np.ndarray:
        """``f_n = Delta1_{n+1} - Delta2_{n+1}`` for ``0 <= n < n_current``."""
        return (self.d1 - self.d2)[1 : self.n + 1]


@dataclass(frozen=True)
class AdmissibilityReport:
    ratio_max: float
    worst_index: int
    cond1: bool
    x_norms: tuple
    memory_norms: tuple
    cond2: bool
    truncation_residual: float

    @property
    def passed(self) -> bool:
        return self.cond1 and self.cond2


@dataclass
class TrialRecord:
    j: int
    tau: int
    admissible: bool
    cond1_ratio: float
    truncation_residual: float
    branch: Optional[str] = None
    hit: bool = False
    ell_star: Optional[int] = None
    step3: int = 0
    after_step3: bool = False


@dataclass
class CouplingTrace:
    """Outcome of one coupled run.

    ``events`` holds ``(time, phase, event, detail)`` tuples. ``tau_infinity``
    is ``None`` when the pair was not coalesced at the horizon.
    """

    tau_infinity: Optional[int]
    horizon: int
    events: list
    trials: list
    step2_norms: list
    budget_violations: int
    c2_final: int
    hit_residual_max: float
    step2_gap_max: float
    bookkeeping_residual: float
    coalesced_gap_max: float
    seed: tuple
    system: Optional[CoupledSystem] = None

    @property
    def coalesced(self) -> bool:
        return self.tau_infinity is not None


def successful_drift(a, g_history, n: int) -> np.ndarray:
    """``-sum_{l>=1} a_l g_{n-l}``: the drift that keeps the noise increments equal at ``n``."""
    av = np.asarray(a.values if hasattr(a, "values") else a, dtype=np.float64)
    g = np.asarray(g_history, dtype=np.float64)
    if g.ndim == 1:
        g = g[:, None]
    L = min(av.shape[0] - 1, n)
    if L <= 0:
        return np.zeros(g.shape[1])
    return -(av[1 : L + 1] @ g[n - 1 : n - L - 1 if n - L - 1 >= 0 else None : -1])


def admissibility_check(sys: CoupledSystem, cfg: CouplingConfig, n_check: Optional[int] = None,
                        kernel: Optional[CoefficientSequence] = None) -> AdmissibilityReport:
    """Admissibility of the pair at the current time ``tau = sys.n``.

    Condition (1): the memory of past drifts, ``|sum_{k>n} a_k g_{tau+n-k}|``,
    stays below ``v_n`` for ``0 <= n <= n_check``. Condition (2): positions
    and memory terms of both copies lie in the ball of radius ``cfg.K``.

    The decision uses the simulated (truncated) kernel. The contribution of
    the kernel beyond its truncation is bounded separately in
    ``truncation_residual``.
    """
    tau = sys.n
    K = sys.a.shape[0] - 1
    if n_check is None:
        n_check = cfg.n_check if cfg.n_check is not None else K
    tail = _kernels.memory_tail(sys.a, sys.g, tau, n_check, 0) if tau > 0 else np.zeros((n_check + 1, sys.dim))
    norms = np.sqrt(np.sum(tail * tail, axis=1))
    ratios = norms / cfg.speed(np.arange(n_check + 1))
    worst = int(np.argmax(ratios))
    ratio_max = float(ratios[worst])
    residual = 0.0
    if kernel is not None and tau > 0 and kernel.family != "custom":
        gmax = float(np.max(np.abs(sys.g[:tau]))) if tau > 0 else 0.0
        if gmax > 0:
            residual = gmax * math.sqrt(sys.dim) * kernel.tail_abs_sum(K + 1, K + tau)
    xs = (float(np.linalg.norm(sys.x1[tau])), float(np.linalg.norm(sys.x2[tau])))
    ms = (float(np.linalg.norm(sys.memory(1, tau))), float(np.linalg.norm(sys.memory(2, tau))))
    cond2 = max(xs) <= cfg.K and max(ms) <= cfg.K
    return AdmissibilityReport(ratio_max, worst, ratio_max <= 1.0, xs, ms, bool(cond2), residual)


class _Runner:
    def __init__(self, model: EulerModel, a: CoefficientSequence, cfg: CouplingConfig,
                 seed: int, stream: int, history: Optional[int], record: bool):
        self.model = model
        self.kernel = a
        self.av = np.ascontiguousarray(a.values, dtype=np.float64)
        self.cfg = cfg
        self.rng = CounterStream(seed, stream)
        self.seed = (int(seed), int(stream))
        self.record = record
        d = model.dim
        hist = a.K if history is None else int(history)
        past = self.rng.standard_normal((hist, d)) if hist else np.zeros((0, d))
        self.sys = CoupledSystem.start(
            self.av, d, cfg.horizon, hist,
            np.full(d, cfg.x1_0, dtype=np.float64), np.full(d, cfg.x2_0, dtype=np.float64), past,
        )
        self.events = []
        self.trials = []
        self.step2_norms = []
        self.budget_violations = 0
        self.overflow_trials = 0
        self.c2 = int(cfg.c2)
        self.hit_residual = 0.0
        self.step2_gap = 0.0
        if model.is_affine:
            self.M = np.eye(d) + model.h * model.linear_drift
            self.S = model.constant_diffusion

    def log(self, t, phase, event, detail=""):
        if self.record:
            self.events.append((int(t), phase, event, detail))

    # -- path advancement ------------------------------------------------

    def _advance(self, t0: int, t1: int) -> None:
        """Compute noise and positions for times ``t0..t1`` from stored innovations."""
        s = self.sys
        p0, p1 = s.pos(t0), s.pos(t1) + 1
        s.d1[t0 : t1 + 1] = _kernels.moving_average(self.av, s.xi1, p0, p1)
        s.d2[t0 : t1 + 1] = _kernels.moving_average(self.av, s.xi2, p0, p1)
        for x, dl in ((s.x1, s.d1), (s.x2, s.d2)):
            if self.model.is_affine:
                x[t0 - 1 : t1 + 1] = _kernels.affine_recursion(self.M, self.S, x[t0 - 1], dl[t0 : t1 + 1])
            else:
                m = self.model
                for t in range(t0, t1 + 1):
                    xp = x[t - 1]
                    x[t] = xp + m.h * m.b(xp) + m.sigma(xp) @ dl[t]
        s.n = t1

    def _shared(self, t0: int, t1: int) -> None:
        """Identical fresh innovations for times ``t0..t1``."""
        if t1 < t0:
            return
        s = self.sys
        blk = self.rng.standard_normal((t1 - t0 + 1, s.dim))
        s.xi1[s.pos(t0) : s.pos(t1) + 1] = blk
        s.xi2[s.pos(t0) : s.pos(t1) + 1] = blk
        s.g[t0 - 1 : t1] = 0.0
        self._advance(t0, t1)

    # -- phases ----------------------------------------------------------

    def _pre_phase(self) -> bool:
        s = self.sys
        N = s.horizon
        while s.n < N:
            rep = admissibility_check(s, self.cfg, n_check=0)
            if rep.cond2:
                s.tau0 = s.n
                s.tau_list.append(s.n)
                self.log(s.n, "pre", "admissible", "")
                return True
            self._shared(s.n + 1, s.n + 1)
        return False

    def _step3(self, tau_fail_end: int, ell_star: int) -> None:
        s = self.sys
        dt = step3_duration(s.j, ell_star, self.cfg)
        self.trials[-1].step3 = dt
        s.phase = "step3"
        s.ell_star_list.append(ell_star)
        end = min(tau_fail_end + dt, s.horizon)
        self.log(tau_fail_end, "step3", "wait", f"duration={dt}")
        self._shared(tau_fail_end + 1, end)
        s.tau_list.append(end)

    def _trial(self) -> Optional[int]:
        """One trial starting at ``sys.n``. Returns the hit time if the pair stays coalesced to the horizon."""
        s, cfg = self.sys, self.cfg
        tau = s.n
        s.j += 1
        rep = admissibility_check(s, cfg, kernel=self.kernel)
        rec = TrialRecord(s.j, tau, rep.passed, rep.ratio_max, rep.truncation_residual,
                          after_step3=s.j > 1)
        self.trials.append(rec)
        s.phase = "step1"
        if not rep.passed:
            self.log(tau, "step1", "not-admissible", f"ratio={rep.ratio_max:.3g} cond2={rep.cond2}")
            self._shared(tau + 1, tau + 1)
            rec.ell_star = 0
            if s.n < s.horizon:
                self._step3(tau + 1, 0)
            return None
        y1, y2 = s.memory(1, tau), s.memory(2, tau)
        lam = hitting_map(self.model, HittingMapParams(s.x1[tau], s.x2[tau], y1, y2))
        draw = sample_hitting_pair(lam, s.dim, self.rng)
        p = s.pos(tau + 1)
        s.xi1[p] = draw.z1
        s.xi2[p] = draw.z2
        s.g[tau] = draw.z1 - draw.z2
        self._advance(tau + 1, tau + 1)
        rec.branch = draw.branch
        hit = draw.branch == FORWARD and float(np.linalg.norm(draw.z1)) <= cfg.k1
        rec.hit = hit
        if draw.branch == FORWARD:
            r = float(np.max(np.abs(s.x1[tau + 1] - s.x2[tau + 1])))
            self.hit_residual = max(self.hit_residual, r)
        if not hit:
            self.log(tau + 1, "step1", "miss", draw.branch)
            rec.ell_star = 0
            if s.n < s.horizon:
                self._step3(tau + 1, 0)
            return None
        self.log(tau + 1, "step1", "hit", "")
        s.phase = "step2"
        ell = 1
        overflowed = False
        while True:
            start, end = covering_interval(ell, self.c2, tau, cfg.mode)
            if start > s.horizon:
                return tau + 1
            end = min(end, s.horizon)
            # drift indices start-1 .. end-1 drive innovations start .. end
            _kernels.successful_drift(self.av, s.g, start - 1, end, 0)
            target = s.g[start - 1 : end].copy()
            norm = float(np.max(np.sqrt(np.sum(target * target, axis=0))))
            if ell == 1:
                budget = min(1.1 * norm, cfg.ck_max)
            else:
                budget = cfg.budget(ell)
                self.step2_norms.append((ell, norm, budget))
            if norm > budget:
                self.budget_violations += 1
                overflowed = True
                self.log(start, "step2", "budget-violation", f"ell={ell} norm={norm:.3g} budget={budget:.3g}")
                budget = norm
            xi1, xi2, ok = interval_coupling(target, budget, self.rng)
            s.xi1[s.pos(start) : s.pos(end) + 1] = xi1
            s.xi2[s.pos(start) : s.pos(end) + 1] = xi2
            s.g[start - 1 : end] = xi1 - xi2
            self._advance(start, end)
            if not ok:
                self.log(end, "step2", "fail", f"ell={ell}")
                rec.ell_star = ell
                self._note_overflow(overflowed)
                if s.n < s.horizon:
                    self._step3(end, ell)
                return None
            gap = float(np.max(np.abs(s.x1[start : end + 1] - s.x2[start : end + 1])))
            self.step2_gap = max(self.step2_gap, gap)
            if end >= s.horizon:
                self._note_overflow(overflowed)
                return tau + 1
            ell += 1

    def _note_overflow(self, overflowed: bool) -> None:
        if not overflowed:
            return
        self.overflow_trials += 1
        if self.overflow_trials >= self.cfg.escalate_after and self.c2 < self.cfg.c2_max:
            self.c2 = min(2 * self.c2, self.cfg.c2_max)
            self.overflow_trials = 0
            self.log(self.sys.n, "step2", "escalate-c2", f"c2={self.c2}")

    def run(self) -> CouplingTrace:
        s = self.sys
        N = s.horizon
        tau_inf = None
        if N == 0:
            if np.array_equal(s.x1[0], s.x2[0]):
                tau_inf = 0
        elif self._pre_phase():
            while s.n < N:
                hit_time = self._trial()
                if hit_time is not None:
                    tau_inf = hit_time
                    break
        s.phase = "done"
        book = self._bookkeeping()
        gap = 0.0
        if tau_inf is not None:
            gap = float(np.max(np.abs(s.x1[tau_inf:] - s.x2[tau_inf:])))
        self.log(s.n, "done", "coalesced" if tau_inf is not None else "horizon", str(tau_inf))
        return CouplingTrace(
            tau_inf, N, self.events, self.trials, self.step2_norms, self.budget_violations,
            self.c2, self.hit_residual, self.step2_gap, book, gap, self.seed,
        )

    def _bookkeeping(self) -> float:
        # f_n recomputed from the drift history must match the noise difference
        s = self.sys
        n = s.n
        if n == 0:
            return 0.0
        conv = _kernels.NUMPY.moving_average(self.av, s.g[:n], 0, n)
        f = (s.d1 - s.d2)[1 : n + 1]
        res = float(np.max(np.abs(f - conv)))
        scale = max(1.0, float(np.max(np.abs(s.g[:n]))))
        if res > 1e-10 * scale:
            raise InvariantError(f"noise difference deviates from a * g by {res:.3g}")
        return res


def run_coupling(model: EulerModel, a: CoefficientSequence, cfg: CouplingConfig, seed: int = 0,
                 stream: int = 0, history: Optional[int] = None, record: bool = False,
                 keep_system: bool = False) -> CouplingTrace:
    """Simulate one coupled pair up to ``cfg.horizon``.

    Parameters
    ----------
    history : int, optional
        Number of shared past innovations; defaults to the kernel length.
    record : bool
        Keep the event log.
    keep_system : bool
        Attach the full :class:`CoupledSystem` (paths and innovations) to the trace.
    """
    runner = _Runner(model, a, cfg, seed, stream, history, record)
    trace = runner.run()
    if keep_system:
        trace.system = runner.sys
    return trace


def replay_paths(model: EulerModel, a, xi1, xi2, x1_0, x2_0, history: int):
    """Recompute both trajectories from stored innovations with plain numpy convolutions."""
    av = np.asarray(a.values if hasattr(a, "values") else a, dtype=np.float64)
    out = []
    for xi, x0 in ((xi1, x1_0), (xi2, x2_0)):
        T = xi.shape[0] - history
        dl = np.empty((T, xi.shape[1]))
        for c in range(xi.shape[1]):
            dl[:, c] = np.convolve(xi[:, c], av)[history : history + T]
        x = np.empty((T + 1, xi.shape[1]))
        x[0] = x0
        for t in range(T):
            x[t + 1] = x[t] + model.h * model.b(x[t]) + model.sigma(x[t]) @ dl[t]
        out.append(x)
    return out[0], out[1]
