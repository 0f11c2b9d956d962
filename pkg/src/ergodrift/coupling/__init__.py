"""Coalescent coupling of two copies of a system driven by moving-average noise."""

from .engine import (
    AdmissibilityReport,
    CoupledSystem,
    CouplingTrace,
    TrialRecord,
    admissibility_check,
    replay_paths,
    run_coupling,
    successful_drift,
)
from .samplers import (
    BACKWARD,
    DIAGONAL,
    FORWARD,
    HitDraw,
    hitting_probabilities,
    interval_coupling,
    sample_hitting_pair,
    translation_coupling_1d,
    translation_coupling_1d_batch,
    translation_stick_probability,
)
from .schedule import CouplingConfig, covering_interval, interval_schedule, step3_duration
from .tail import TailEstimate, estimate_tv_tail, survival_curve, tail_from_summaries, wilson_band

__all__ = [
    "AdmissibilityReport",
    "BACKWARD",
    "CoupledSystem",
    "CouplingConfig",
    "CouplingTrace",
    "DIAGONAL",
    "FORWARD",
    "HitDraw",
    "TailEstimate",
    "TrialRecord",
    "admissibility_check",
    "covering_interval",
    "estimate_tv_tail",
    "hitting_probabilities",
    "interval_coupling",
    "interval_schedule",
    "replay_paths",
    "run_coupling",
    "sample_hitting_pair",
    "step3_duration",
    "successful_drift",
    "survival_curve",
    "tail_from_summaries",
    "translation_coupling_1d",
    "translation_coupling_1d_batch",
    "translation_stick_probability",
    "wilson_band",
]
