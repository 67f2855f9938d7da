"""Steady-state metrics (TER, AER, INS) and transition metrics (delays, INS,
TCE, PNM), computed per span plus grouped mean/SD aggregation.

Metrics are expressed in percent of the decisions inside the span; the INS
denominator is the total decision count of the region, not the pair count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import MotionClass
from .errors import ParameterError
from .stream import (
    DecisionStream,
    SteadyStateSpan,
    TransitionDelays,
    TransitionSpan,
)

STEADY_METRIC_NAMES = ("aer", "ter", "ins")
TRANSITION_METRIC_NAMES = ("t_offset", "t_onset", "t_transition", "ins", "tce", "pnm")

_NM = int(MotionClass.NM)


@dataclass(frozen=True)
class SteadyStateMetrics:
    ter: float
    aer: float
    ins: float
    decision_count: int
    span: SteadyStateSpan

    def values(self) -> dict[str, float]:
        return {"aer": self.aer, "ter": self.ter, "ins": self.ins}


@dataclass(frozen=True)
class TransitionMetrics:
    t_offset_ms: float
    t_onset_ms: float
    t_transition_ms: float
    ins: float
    tce: float
    pnm: float
    group: str
    decision_count: int
    span: TransitionSpan

    def values(self) -> dict[str, float]:
        return {
            "t_offset": self.t_offset_ms,
            "t_onset": self.t_onset_ms,
            "t_transition": self.t_transition_ms,
            "ins": self.ins,
            "tce": self.tce,
            "pnm": self.pnm,
        }


def _instability(decisions: np.ndarray) -> float:
    """Adjacent active-class decision pairs that differ, per decision."""
    if decisions.size < 2:
        return 0.0
    a, b = decisions[:-1], decisions[1:]
    unstable = (a != _NM) & (b != _NM) & (a != b)
    return 100.0 * float(np.count_nonzero(unstable)) / decisions.size


def steady_metrics(stream: DecisionStream, span: SteadyStateSpan) -> SteadyStateMetrics:
    """TER/AER/INS of one steady-state region of the (unsmoothed) stream."""
    if not 0 <= span.start_frame < span.end_frame <= len(stream):
        raise ParameterError(
            f"span [{span.start_frame}, {span.end_frame}) not within stream"
        )
    d = stream.classes[span.start_frame:span.end_frame]
    target = int(span.cls)
    wrong = d != target
    ter = 100.0 * float(np.count_nonzero(wrong)) / d.size
    aer = 100.0 * float(np.count_nonzero(wrong & (d != _NM))) / d.size
    return SteadyStateMetrics(
        ter=ter,
        aer=aer,
        ins=_instability(d),
        decision_count=int(d.size),
        span=span,
    )


def transition_metrics(
    stream: DecisionStream, span: TransitionSpan, delays: TransitionDelays
) -> TransitionMetrics:
    """INS/TCE/PNM of one transition region, with its delays attached.

    An empty span (abutting steady states) yields zero INS/TCE/PNM and
    contributes its delays only.
    """
    if not 0 <= span.start_frame <= span.end_frame <= len(stream):
        raise ParameterError(
            f"span [{span.start_frame}, {span.end_frame}) not within stream"
        )
    d = stream.classes[span.start_frame:span.end_frame]
    if d.size == 0:
        ins = tce = pnm = 0.0
    else:
        adjacent = (d == int(span.from_cls)) | (d == int(span.to_cls))
        tertiary = ~adjacent & (d != _NM)
        tce = 100.0 * float(np.count_nonzero(tertiary)) / d.size
        pnm = 100.0 * float(np.count_nonzero(d == _NM)) / d.size
        ins = _instability(d)
    return TransitionMetrics(
        t_offset_ms=delays.t_offset_ms,
        t_onset_ms=delays.t_onset_ms,
        t_transition_ms=delays.t_transition_ms,
        ins=ins,
        tce=tce,
        pnm=pnm,
        group=span.group,
        decision_count=int(d.size),
        span=span,
    )


@dataclass(frozen=True)
class Stat:
    """Mean and sample standard deviation of one metric over one key."""

    mean: float
    sd: float
    n: int


def aggregate(values) -> Stat:
    """Mean and (n-1)-normalized SD; a single value has SD 0."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ParameterError("cannot aggregate an empty group")
    sd = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return Stat(mean=float(np.mean(arr)), sd=sd, n=int(arr.size))


def group_and_aggregate(
    transition_records,
    steady_records,
) -> dict[str, dict]:
    """Aggregate keyed metric records into per-key per-metric stats.

    Records are (key, metrics) pairs where key is any hashable grouping
    (e.g. (classifier, participant, group)).  Empty groups are absent from
    the output rather than reported as zero; key order is sorted for stable
    output.
    """
    report = {"steady": {}, "transitions": {}}
    for section, records, names in (
        ("transitions", transition_records, TRANSITION_METRIC_NAMES),
        ("steady", steady_records, STEADY_METRIC_NAMES),
    ):
        buckets: dict = {}
        for key, m in records:
            buckets.setdefault(key, []).append(m.values())
        for key in sorted(buckets):
            rows = buckets[key]
            report[section][key] = {
                name: aggregate(row[name] for row in rows) for name in names
            }
    return report
