"""Decision-stream smoothing and steady-state/transition segmentation.

Steady-state spans are found on the majority-vote-smoothed stream: a span
starts at the first frame at/after its prompt whose decision matches the
prompted class, and ends at the first frame at/after the *next* prompt whose
decision no longer matches; both boundaries are pulled back by the majority
vote's group delay.  Frames between consecutive steady states form unlabeled
transition spans, grouped as rest-to-active (R2A), active-to-rest (A2R), or
active-to-active (A2A).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import NUM_CLASSES, MotionClass, PromptTimeline
from .dsp import FrameSpec
from .errors import ParameterError

DEFAULT_MV_WINDOW = 9
DEFAULT_MV_DELAY_FRAMES = 4

GROUP_R2A = "R2A"
GROUP_A2R = "A2R"
GROUP_A2A = "A2A"
TRANSITION_GROUPS = (GROUP_R2A, GROUP_A2R, GROUP_A2A)


def group_of(from_cls: MotionClass, to_cls: MotionClass) -> str:
    """Transition group: R2A when leaving rest, A2R when entering rest."""
    if from_cls == to_cls:
        raise ParameterError("transitions need distinct endpoint classes")
    if from_cls == MotionClass.NM:
        return GROUP_R2A
    if to_cls == MotionClass.NM:
        return GROUP_A2R
    return GROUP_A2A


@dataclass
class DecisionStream:
    """Per-frame class decisions with confidences and a frame-time mapping."""

    classes: np.ndarray  # (frames,) MotionClass values
    confidences: np.ndarray
    spec: FrameSpec
    sample_rate: float

    def __post_init__(self):
        self.classes = np.asarray(self.classes, dtype=np.int64)
        self.confidences = np.asarray(self.confidences, dtype=np.float64)
        if self.classes.shape != self.confidences.shape or self.classes.ndim != 1:
            raise ParameterError("classes and confidences must be 1-D and aligned")

    def __len__(self) -> int:
        return self.classes.shape[0]

    def times_ms(self) -> np.ndarray:
        """Decision time of each frame (its end sample), in ms."""
        return self.spec.decision_time_ms(np.arange(len(self)), self.sample_rate)

    def motion_classes(self) -> list[MotionClass]:
        return [MotionClass(int(v)) for v in self.classes]


def majority_vote(stream: DecisionStream, window: int = DEFAULT_MV_WINDOW) -> DecisionStream:
    """Causal modal smoothing over the current and previous window-1 frames.

    Count ties go to the most recent decision among the tied classes.  The
    output confidence is the highest original confidence among the window
    members of the winning class.  Window 1 is the identity.
    """
    if window < 1 or window % 2 == 0:
        raise ParameterError("window must be odd and >= 1")
    if window == 1:
        return DecisionStream(
            stream.classes.copy(),
            stream.confidences.copy(),
            stream.spec,
            stream.sample_rate,
        )
    n = len(stream)
    cls = stream.classes
    conf = stream.confidences
    out_cls = np.empty(n, dtype=np.int64)
    out_conf = np.empty(n)
    counts = np.zeros(NUM_CLASSES, dtype=np.int64)
    for i in range(n):
        counts[cls[i]] += 1
        if i >= window:
            counts[cls[i - window]] -= 1
        top = counts.max()
        lo = max(0, i - window + 1)
        winner = -1
        best = -1.0
        for j in range(i, lo - 1, -1):  # backward: most recent tied class wins
            if counts[cls[j]] == top:
                winner = cls[j]
                break
        for j in range(lo, i + 1):
            if cls[j] == winner and conf[j] > best:
                best = conf[j]
        out_cls[i] = winner
        out_conf[i] = best
    return DecisionStream(out_cls, out_conf, stream.spec, stream.sample_rate)


@dataclass(frozen=True)
class SteadyStateSpan:
    cls: MotionClass
    start_frame: int  # inclusive
    end_frame: int  # exclusive
    prompt_index: int


@dataclass(frozen=True)
class TransitionSpan:
    from_cls: MotionClass
    to_cls: MotionClass
    start_frame: int
    end_frame: int
    group: str
    from_prompt: int
    to_prompt: int


@dataclass
class SegmentLabeling:
    """Steady spans, the transition spans between them, and the bookkeeping
    of prompts/transitions that had to be discarded."""

    steady: list[SteadyStateSpan]
    transitions: list[TransitionSpan]
    discarded_prompts: list[int]
    dropped_spans: list[tuple[int, int]] = field(default_factory=list)
    num_prompts: int = 0

    @property
    def dropped_transition_count(self) -> int:
        """Transition slots lost to discarded prompts or same-class bridges;
        emitted + dropped == prompts - 1."""
        if not self.steady:
            return max(self.num_prompts - 1, 0)
        return len(self.discarded_prompts) + len(self.dropped_spans)


def find_steady_states(
    smoothed: DecisionStream,
    timeline: PromptTimeline,
    mv_delay_frames: int = DEFAULT_MV_DELAY_FRAMES,
) -> SegmentLabeling:
    """Label steady-state spans per prompt and derive transition spans.

    A prompt during which the prompted class never appears is discarded (an
    operator error is assumed); the surrounding steady states are bridged.
    Bridges whose endpoints share a class cannot form a valid transition and
    are dropped with their frame range recorded in dropped_spans.  Boundary
    indices are clamped to the stream.
    """
    if mv_delay_frames < 0:
        raise ParameterError("mv_delay_frames must be >= 0")
    n = len(smoothed)
    times = smoothed.times_ms()
    prompt_times = timeline.start_times * 1000.0
    if n == 0 or times[-1] < prompt_times[-1]:
        raise ParameterError(
            "decision stream does not cover the prompt timeline"
        )
    first_at = np.searchsorted(times, prompt_times, side="left")
    cls = smoothed.classes
    prompts = timeline.classes
    num_prompts = len(prompts)
    steady: list[SteadyStateSpan] = []
    discarded: list[int] = []
    for j, prompt_cls in enumerate(prompts):
        lo = int(first_at[j])
        hi = int(first_at[j + 1]) if j + 1 < num_prompts else n
        matches = np.flatnonzero(cls[lo:hi] == int(prompt_cls))
        if matches.size == 0:
            discarded.append(j)
            continue
        start_found = lo + int(matches[0])
        if j + 1 < num_prompts:
            after = int(first_at[j + 1])
            mismatches = np.flatnonzero(cls[after:] != int(prompt_cls))
            end_found = after + int(mismatches[0]) if mismatches.size else n
            start = max(0, start_found - mv_delay_frames)
            end = min(max(0, end_found - mv_delay_frames), n)
        else:
            # last prompt: steady state runs to the stream end, no shift
            start = max(0, start_found - mv_delay_frames)
            end = n
        if steady:
            start = max(start, steady[-1].end_frame)
        end = max(end, start + 1)
        steady.append(SteadyStateSpan(prompt_cls, start, end, j))
    transitions: list[TransitionSpan] = []
    dropped: list[tuple[int, int]] = []
    for a, b in zip(steady, steady[1:]):
        if a.cls == b.cls:
            dropped.append((a.end_frame, b.start_frame))
            continue
        transitions.append(
            TransitionSpan(
                from_cls=a.cls,
                to_cls=b.cls,
                start_frame=a.end_frame,
                end_frame=b.start_frame,
                group=group_of(a.cls, b.cls),
                from_prompt=a.prompt_index,
                to_prompt=b.prompt_index,
            )
        )
    return SegmentLabeling(
        steady=steady,
        transitions=transitions,
        discarded_prompts=discarded,
        dropped_spans=dropped,
        num_prompts=num_prompts,
    )


@dataclass(frozen=True)
class TransitionDelays:
    """Prompt-relative response times of one transition, in ms."""

    t_offset_ms: float
    t_onset_ms: float

    @property
    def t_transition_ms(self) -> float:
        return self.t_onset_ms - self.t_offset_ms


def compute_delays(
    labeling: SegmentLabeling,
    timeline: PromptTimeline,
    spec: FrameSpec,
    sample_rate: float,
) -> list[TransitionDelays]:
    """Offset/onset delays per transition, relative to the prompt change that
    initiated it (the destination prompt's start time).

    T_OFFSET is when the classifier left the previous steady state (time of
    the transition's first frame); T_ONSET is when it reached the next one
    (time of the frame after the transition's last).  T_TRANSITION is their
    difference, so the identity T_TRANSITION = T_ONSET - T_OFFSET is exact.
    """
    start_times = timeline.start_times
    out = []
    for tr in labeling.transitions:
        t_change = start_times[tr.to_prompt] * 1000.0
        t_off = float(spec.decision_time_ms(tr.start_frame, sample_rate)) - t_change
        t_on = float(spec.decision_time_ms(tr.end_frame, sample_rate)) - t_change
        out.append(TransitionDelays(t_offset_ms=t_off, t_onset_ms=t_on))
    return out


def labeling_to_csv(labeling: SegmentLabeling) -> str:
    """Audit export: one row per span (kind, classes, frames, group)."""
    rows = ["kind,class_from,class_to,start_frame,end_frame,group,prompt_index"]
    events = [
        (s.start_frame, "steady", s.cls.name, s.cls.name, s.end_frame, "", s.prompt_index)
        for s in labeling.steady
    ] + [
        (t.start_frame, "transition", t.from_cls.name, t.to_cls.name, t.end_frame,
         t.group, t.to_prompt)
        for t in labeling.transitions
    ]
    for start, kind, cfrom, cto, end, group, prompt in sorted(events):
        rows.append(f"{kind},{cfrom},{cto},{start},{end},{group},{prompt}")
    return "\n".join(rows) + "\n"
