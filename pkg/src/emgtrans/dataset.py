"""Recordings, prompt timelines, motion classes, and the synthetic generator.

The synthetic generator stands in for human data collection: each channel is
zero-mean Gaussian noise whose standard deviation follows a piecewise-linear
envelope between per-class amplitude levels.  Class changes happen after a
sampled reaction delay and take a sampled ramp duration; active-to-active
changes pass through a partial "release" dip toward (but not reaching) the
rest level before ramping up to the new class.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FormatError, ParameterError

KIND_TRAINING = "training-repetition"
KIND_TEST = "continuous-test"

_RECORDING_KINDS = (KIND_TRAINING, KIND_TEST)

# rng stream tags so training/test draws never collide for one seed
_STREAM_TRAIN = 1
_STREAM_TEST = 2
_STREAM_PROFILE = 3


class MotionClass(enum.IntEnum):
    """The seven contraction classes.  NM is the unique rest class."""

    NM = 0
    WF = 1
    WE = 2
    WP = 3
    WS = 4
    CG = 5
    HO = 6

    @property
    def is_active(self) -> bool:
        return self is not MotionClass.NM


CLASSES = tuple(MotionClass)
NUM_CLASSES = len(CLASSES)
ACTIVE_CLASSES = tuple(c for c in CLASSES if c.is_active)


@dataclass(frozen=True)
class PromptTimeline:
    """Ordered prompt schedule: (start_time_s, class) pairs plus the nominal
    prompt duration."""

    entries: tuple[tuple[float, MotionClass], ...]
    prompt_duration: float

    def __post_init__(self):
        entries = tuple((float(t), MotionClass(c)) for t, c in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ParameterError("timeline must contain at least one prompt")
        if self.prompt_duration <= 0:
            raise ParameterError("prompt_duration must be positive")
        for i in range(1, len(entries)):
            if entries[i][0] <= entries[i - 1][0]:
                raise ParameterError(
                    f"timeline start times must be strictly increasing "
                    f"(entry {i}: {entries[i][0]} after {entries[i - 1][0]})"
                )
            if entries[i][1] == entries[i - 1][1]:
                raise ParameterError(
                    f"consecutive prompts must differ in class (entry {i}: "
                    f"{entries[i][1].name} repeats)"
                )

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def start_times(self) -> np.ndarray:
        return np.array([t for t, _ in self.entries])

    @property
    def classes(self) -> tuple[MotionClass, ...]:
        return tuple(c for _, c in self.entries)

    def class_at(self, time_s: float) -> MotionClass:
        """Prompted class at a given time (first prompt before t=0)."""
        cls = self.entries[0][1]
        for t, c in self.entries:
            if time_s < t:
                break
            cls = c
        return cls

    def transition_pairs(self) -> list[tuple[MotionClass, MotionClass]]:
        """Consecutive (prev, next) class pairs."""
        cs = self.classes
        return [(cs[i], cs[i + 1]) for i in range(len(cs) - 1)]


@dataclass
class Recording:
    """Multichannel signal with its sampling rate and prompt timeline.

    samples has shape (channels, time); amplitude units are arbitrary.
    """

    samples: np.ndarray
    sample_rate: float
    timeline: PromptTimeline
    kind: str

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise ParameterError("samples must be a (channels, time) matrix")
        if self.sample_rate <= 0:
            raise ParameterError("sample_rate must be positive")
        if self.kind not in _RECORDING_KINDS:
            raise ParameterError(f"unknown recording kind {self.kind!r}")
        last_start = self.timeline.entries[-1][0]
        if self.timeline.entries[0][0] < 0 or last_start > self.duration:
            raise ParameterError(
                f"timeline entries must fall within [0, {self.duration}] s"
            )

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.samples.shape[1] / self.sample_rate

    def equals(self, other: "Recording") -> bool:
        return (
            self.kind == other.kind
            and self.sample_rate == other.sample_rate
            and self.timeline == other.timeline
            and self.samples.shape == other.samples.shape
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(frozen=True)
class SyntheticSubjectProfile:
    """Amplitude model of one synthetic subject.

    class_gains[k, c] is the full-contraction noise std of class k on channel
    c; noise_floor[k] is an additive std floor.  Reaction delays and ramp
    durations are drawn per event from clipped normal distributions.
    """

    class_gains: np.ndarray
    noise_floor: np.ndarray
    reaction_delay_ms: tuple[float, float]
    ramp_ms: tuple[float, float]
    seed: int
    sample_rate: float = 1000.0
    release_depth: float = 0.3
    release_mix: float = 0.5  # dip pattern: 0 = min of the two classes, 1 = max
    release_ms: tuple[float, float] = (300.0, 75.0)
    release_rebound: float = 0.3  # departing-class re-intrusion while engaging
    amplitude_wander: tuple[float, float] = (0.25, 400.0)  # (log-sd, tau ms)
    transition_async: float = 0.8  # per-channel timing scatter in A2A changes

    def __post_init__(self):
        gains = np.asarray(self.class_gains, dtype=np.float64)
        floor = np.asarray(self.noise_floor, dtype=np.float64)
        object.__setattr__(self, "class_gains", gains)
        object.__setattr__(self, "noise_floor", floor)
        if gains.ndim != 2 or gains.shape[0] != NUM_CLASSES or gains.shape[1] < 1:
            raise ParameterError(
                f"class_gains must have shape (7, channels), got {gains.shape}"
            )
        if floor.shape != (NUM_CLASSES,):
            raise ParameterError("noise_floor must have one entry per class")
        if np.any(gains < 0) or np.any(floor < 0):
            raise ParameterError("gains and noise floors must be non-negative")
        nm_norm = np.linalg.norm(gains[MotionClass.NM])
        for cls in ACTIVE_CLASSES:
            if np.linalg.norm(gains[cls]) <= nm_norm:
                raise ParameterError(
                    f"NM gain norm must be strictly below {cls.name} gain norm"
                )
        for name, (mean, spread) in (
            ("reaction_delay_ms", self.reaction_delay_ms),
            ("ramp_ms", self.ramp_ms),
            ("release_ms", self.release_ms),
        ):
            if mean <= 0 or spread < 0:
                raise ParameterError(f"{name} must have positive mean, spread >= 0")
        if not 0 <= self.release_depth < 1:
            raise ParameterError("release_depth must lie in [0, 1)")
        if not 0 <= self.release_mix <= 1:
            raise ParameterError("release_mix must lie in [0, 1]")
        if not 0 <= self.release_rebound < 1:
            raise ParameterError("release_rebound must lie in [0, 1)")
        if self.amplitude_wander[0] < 0 or self.amplitude_wander[1] <= 0:
            raise ParameterError("amplitude_wander needs sd >= 0 and tau > 0")
        if not 0 <= self.transition_async < 1:
            raise ParameterError("transition_async must lie in [0, 1)")
        if self.sample_rate <= 0:
            raise ParameterError("sample_rate must be positive")

    @property
    def channel_count(self) -> int:
        return self.class_gains.shape[1]

    def class_levels(self) -> np.ndarray:
        """Per-class per-channel steady noise std, floor included."""
        return self.class_gains + self.noise_floor[:, None]

    def with_seed(self, seed: int) -> "SyntheticSubjectProfile":
        return replace(self, seed=int(seed))


def default_profile(
    seed: int,
    channels: int = 8,
    separation: float = 1.0,
    noise_floor: float = 0.05,
) -> SyntheticSubjectProfile:
    """Reference subject profile: 8 channels at 1 kHz.

    Each active class gets a circular Gaussian bump of amplitude over the
    channel ring, with subject-specific jitter drawn from the seed.  Larger
    ``separation`` sharpens and strengthens the bumps (easier classes).
    """
    if channels < 1:
        raise ParameterError("channels must be >= 1")
    if separation <= 0:
        raise ParameterError("separation must be positive")
    rng = np.random.default_rng([_STREAM_PROFILE, seed])
    gains = np.zeros((NUM_CLASSES, channels))
    gains[MotionClass.NM] = 0.02
    positions = np.arange(channels, dtype=float)
    width = 1.0 / np.sqrt(separation)
    for i, cls in enumerate(ACTIVE_CLASSES):
        center = i * channels / len(ACTIVE_CLASSES)
        dist = np.abs(positions - center)
        dist = np.minimum(dist, channels - dist)  # circular electrode ring
        bump = np.exp(-0.5 * (dist / width) ** 2)
        gains[cls] = 0.04 + 0.96 * separation * bump
    jitter = rng.lognormal(mean=0.0, sigma=0.12, size=(NUM_CLASSES, channels))
    gains *= jitter
    return SyntheticSubjectProfile(
        class_gains=gains,
        noise_floor=np.full(NUM_CLASSES, noise_floor),
        reaction_delay_ms=(150.0, 40.0),
        ramp_ms=(200.0, 50.0),
        seed=int(seed),
    )


def _positive_ms(rng: np.random.Generator, mean: float, spread: float) -> float:
    return float(max(1.0, rng.normal(mean, spread)))


class _Envelope:
    """Piecewise-linear per-channel amplitude envelope built from knots."""

    def __init__(self, channels: int):
        self.times: list[list[float]] = [[] for _ in range(channels)]
        self.levels: list[list[float]] = [[] for _ in range(channels)]

    def add(self, channel: int, t: float, level: float):
        times = self.times[channel]
        # np.interp needs increasing knots; nudges only fire when ramps
        # spill past a short prompt
        if times and t <= times[-1]:
            t = times[-1] + 1e-9
        times.append(t)
        self.levels[channel].append(float(level))

    def add_all(self, t: float, levels: np.ndarray):
        for c in range(len(self.times)):
            self.add(c, t, levels[c])

    def sample(self, num_samples: int, sample_rate: float) -> np.ndarray:
        t = np.arange(num_samples) / sample_rate
        out = np.empty((len(self.times), num_samples))
        for c in range(len(self.times)):
            out[c] = np.interp(t, np.array(self.times[c]), np.array(self.levels[c]))
        return out


def _wander(
    rng: np.random.Generator,
    channels: int,
    num_samples: int,
    sample_rate: float,
    sd: float,
    tau_ms: float,
) -> np.ndarray:
    """Slow multiplicative contraction-level wander: per-channel lognormal
    AR(1) with unit mean, correlation time tau."""
    if sd == 0.0:
        return np.ones((channels, num_samples))
    step_ms = 32.0
    knots = int(np.ceil(num_samples * 1000.0 / sample_rate / step_ms)) + 2
    alpha = float(np.exp(-step_ms / tau_ms))
    g = np.empty((channels, knots))
    g[:, 0] = rng.standard_normal(channels)
    eps = rng.standard_normal((channels, knots - 1))
    scale = np.sqrt(1.0 - alpha * alpha)
    for k in range(1, knots):
        g[:, k] = alpha * g[:, k - 1] + scale * eps[:, k - 1]
    t = np.arange(num_samples) * (1000.0 / sample_rate)
    kt = np.arange(knots) * step_ms
    out = np.empty((channels, num_samples))
    for c in range(channels):
        out[c] = np.interp(t, kt, g[c])
    return np.exp(sd * out - 0.5 * sd * sd)


def _synthesize(
    rng: np.random.Generator,
    envelope: _Envelope,
    num_samples: int,
    sample_rate: float,
    wander_sd: float,
    wander_tau_ms: float,
) -> np.ndarray:
    sigma = envelope.sample(num_samples, sample_rate)
    channels = sigma.shape[0]
    sigma *= _wander(rng, channels, num_samples, sample_rate, wander_sd, wander_tau_ms)
    return sigma * rng.standard_normal((channels, num_samples))


def generate_training_set(
    profile: SyntheticSubjectProfile, reps: int, rep_duration: float
) -> list[Recording]:
    """Generate ramped training repetitions: ``reps`` recordings per class.

    Recordings are ordered set-major (all 7 classes of repetition 0, then
    repetition 1, ...), matching the leave-one-set-out fold structure.  Each
    active-class repetition starts at rest level and ramps up after a sampled
    reaction delay; NM repetitions stay at rest level throughout.
    """
    if reps < 1:
        raise ParameterError("reps must be >= 1")
    if rep_duration <= 0:
        raise ParameterError("rep_duration must be positive")
    levels = profile.class_levels()
    nm_level = levels[MotionClass.NM]
    num_samples = round(rep_duration * profile.sample_rate)
    recordings = []
    for rep in range(reps):
        for cls in CLASSES:
            rng = np.random.default_rng(
                [_STREAM_TRAIN, profile.seed, rep, int(cls)]
            )
            env = _Envelope(profile.channel_count)
            env.add_all(0.0, nm_level)
            if cls.is_active:
                delay = _positive_ms(rng, *profile.reaction_delay_ms) / 1000.0
                ramp = _positive_ms(rng, *profile.ramp_ms) / 1000.0
                env.add_all(delay, nm_level)
                env.add_all(delay + ramp, levels[cls])
            samples = _synthesize(
                rng, env, num_samples, profile.sample_rate,
                *profile.amplitude_wander,
            )
            timeline = PromptTimeline(((0.0, cls),), rep_duration)
            recordings.append(
                Recording(samples, profile.sample_rate, timeline, KIND_TRAINING)
            )
    return recordings


def _transition_sequence(rng: np.random.Generator) -> list[int]:
    """Randomized Eulerian circuit over the complete digraph on the classes.

    Returns 43 class ordinals starting and ending at NM; every ordered pair
    of distinct classes appears exactly once as a consecutive pair.
    """
    adjacency = {}
    for u in range(NUM_CLASSES):
        out = [v for v in range(NUM_CLASSES) if v != u]
        rng.shuffle(out)
        adjacency[u] = out
    stack = [int(MotionClass.NM)]
    circuit: list[int] = []
    while stack:
        u = stack[-1]
        if adjacency[u]:
            stack.append(adjacency[u].pop())
        else:
            circuit.append(stack.pop())
    circuit.reverse()
    return circuit


def generate_continuous_test(
    profile: SyntheticSubjectProfile, prompt_duration: float
) -> Recording:
    """Generate one continuous test recording covering all 42 ordered
    transitions in seed-determined random order, starting from NM.

    The timeline holds 43 prompts (initial NM plus 42 transitions).  At each
    prompt change the envelope ramps to the new class level after a sampled
    reaction delay; active-to-active changes first dip partway toward rest.
    """
    if prompt_duration <= 0:
        raise ParameterError("prompt_duration must be positive")
    rng = np.random.default_rng([_STREAM_TEST, profile.seed])
    order = _transition_sequence(rng)
    entries = tuple(
        (j * prompt_duration, MotionClass(c)) for j, c in enumerate(order)
    )
    timeline = PromptTimeline(entries, prompt_duration)
    levels = profile.class_levels()
    nm_level = levels[MotionClass.NM]
    channels = profile.channel_count
    env = _Envelope(channels)
    env.add_all(0.0, levels[order[0]])
    for j in range(1, len(order)):
        prev, nxt = order[j - 1], order[j]
        delay = _positive_ms(rng, *profile.reaction_delay_ms) / 1000.0
        t0 = j * prompt_duration + delay
        if prev != MotionClass.NM and nxt != MotionClass.NM:
            # release dip partway toward rest before engaging the next
            # class; per-channel timing scatter desynchronizes the release
            # and rise, so the signal traverses hybrid activation patterns
            lo = np.minimum(levels[prev], levels[nxt])
            hi = np.maximum(levels[prev], levels[nxt])
            residual = lo + profile.release_mix * (hi - lo)
            dip = nm_level + profile.release_depth * np.maximum(
                residual - nm_level, 0.0
            )
            # both phases of an uncoordinated class switch are slower than
            # the practiced rest-to-active ramp; while engaging, the
            # departing class briefly re-intrudes (tug-of-war between the
            # two activation patterns)
            release = _positive_ms(rng, *profile.release_ms) / 1000.0
            rise = _positive_ms(rng, *profile.release_ms) / 1000.0
            reb = profile.release_rebound
            mid = (1.0 - reb) * (dip + 0.7 * (levels[nxt] - dip)) + reb * levels[prev]
            jit = 1.0 + profile.transition_async * rng.uniform(-1, 1, (3, channels))
            for c in range(channels):
                r1 = release * jit[0, c]
                r2 = rise * jit[1, c]
                env.add(c, t0, levels[prev, c])
                env.add(c, t0 + r1, dip[c])
                env.add(c, t0 + r1 + r2 * 0.6 * jit[2, c], mid[c])
                env.add(c, t0 + r1 + r2, levels[nxt, c])
        else:
            ramp = _positive_ms(rng, *profile.ramp_ms) / 1000.0
            env.add_all(t0, levels[prev])
            env.add_all(t0 + ramp, levels[nxt])
    num_samples = round(len(order) * prompt_duration * profile.sample_rate)
    samples = _synthesize(
        rng, env, num_samples, profile.sample_rate, *profile.amplitude_wander
    )
    return Recording(samples, profile.sample_rate, timeline, KIND_TEST)


# ---------------------------------------------------------------------------
# On-disk format: self-describing text container (normative for interchange)
# ---------------------------------------------------------------------------

_MAGIC = "EMGREC 1"


def write_recording(recording: Recording, path) -> None:
    """Write a recording in the versioned text format (see read_recording)."""
    lines = [
        _MAGIC,
        f"sample_rate_hz: {recording.sample_rate!r}",
        f"channel_count: {recording.channel_count}",
        f"kind: {recording.kind}",
        f"prompt_duration_s: {recording.timeline.prompt_duration!r}",
        "[timeline]",
    ]
    for t, cls in recording.timeline.entries:
        lines.append(f"{t!r},{cls.name}")
    lines.append("[data]")
    out = "\n".join(lines)
    rows = "\n".join(
        ",".join(repr(v) for v in row) for row in recording.samples.T.tolist()
    )
    with open(path, "w") as fh:
        fh.write(out)
        fh.write("\n")
        fh.write(rows)
        fh.write("\n")


def _header_value(lines: list[str], lineno: int, key: str) -> str:
    if lineno >= len(lines):
        raise FormatError(f"missing header field {key!r}")
    line = lines[lineno]
    prefix = key + ":"
    if not line.startswith(prefix):
        raise FormatError(f"line {lineno + 1}: expected header field {key!r}")
    return line[len(prefix):].strip()


def read_recording(path) -> Recording:
    """Read a recording written by write_recording.

    Raises FormatError naming the offending field or line on malformed input.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise FormatError(f"line 1: expected {_MAGIC!r} header")
    try:
        sample_rate = float(_header_value(lines, 1, "sample_rate_hz"))
    except ValueError as exc:
        raise FormatError(f"sample_rate_hz: {exc}") from None
    try:
        channel_count = int(_header_value(lines, 2, "channel_count"))
    except ValueError as exc:
        raise FormatError(f"channel_count: {exc}") from None
    kind = _header_value(lines, 3, "kind")
    if kind not in _RECORDING_KINDS:
        raise FormatError(f"kind: unknown recording kind {kind!r}")
    try:
        prompt_duration = float(_header_value(lines, 4, "prompt_duration_s"))
    except ValueError as exc:
        raise FormatError(f"prompt_duration_s: {exc}") from None
    if len(lines) <= 5 or lines[5] != "[timeline]":
        raise FormatError("line 6: expected [timeline] section")
    entries = []
    lineno = 6
    while lineno < len(lines) and lines[lineno] != "[data]":
        row = lines[lineno]
        parts = row.split(",")
        if len(parts) != 2:
            raise FormatError(f"line {lineno + 1}: timeline row needs 2 fields")
        try:
            start = float(parts[0])
        except ValueError:
            raise FormatError(
                f"line {lineno + 1}: bad start_time_s {parts[0]!r}"
            ) from None
        try:
            cls = MotionClass[parts[1]]
        except KeyError:
            raise FormatError(
                f"line {lineno + 1}: unknown class name {parts[1]!r}"
            ) from None
        entries.append((start, cls))
        lineno += 1
    if lineno >= len(lines):
        raise FormatError("missing [data] section")
    data_lines = [
        (no, ln) for no, ln in enumerate(lines[lineno + 1:], lineno + 2) if ln
    ]
    if not data_lines:
        raise FormatError("data section is empty")
    values = np.empty((len(data_lines), channel_count))
    for i, (no, row) in enumerate(data_lines):
        parts = row.split(",")
        if len(parts) != channel_count:
            raise FormatError(
                f"line {no}: expected {channel_count} channel "
                f"values, got {len(parts)}"
            )
        try:
            values[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise FormatError(f"line {no}: {exc}") from None
    try:
        timeline = PromptTimeline(tuple(entries), prompt_duration)
        return Recording(values.T, sample_rate, timeline, kind)
    except ParameterError as exc:
        raise FormatError(str(exc)) from None
