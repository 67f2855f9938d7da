"""Hudgins time-domain features: MAV, WL, ZC, SSC per frame per channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataset import Recording
from .dsp import FrameIndex, FrameSpec, segment_frames
from .errors import ParameterError

FEATURE_NAMES = ("MAV", "WL", "ZC", "SSC")
FEATURES_PER_CHANNEL = len(FEATURE_NAMES)


def mav(x) -> float:
    """Mean absolute value."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ParameterError("mav needs a nonempty frame")
    return float(np.mean(np.abs(x)))


def wl(x) -> float:
    """Waveform length: total variation of the frame."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise ParameterError("wl needs at least 2 samples")
    return float(np.sum(np.abs(np.diff(x))))


def zc(x, threshold: float = 0.0) -> int:
    """Zero crossings: sign changes whose amplitude gap meets the threshold."""
    if threshold < 0:
        raise ParameterError("threshold must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        return 0
    a, b = x[:-1], x[1:]
    return int(np.count_nonzero((a * b < 0) & (np.abs(a - b) >= threshold)))


def ssc(x, threshold: float = 0.0) -> int:
    """Slope sign changes: interior turning points with a big enough step
    on at least one side."""
    if threshold < 0:
        raise ParameterError("threshold must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    if x.size < 3:
        raise ParameterError("ssc needs at least 3 samples")
    left = x[1:-1] - x[:-2]
    right = x[1:-1] - x[2:]
    turning = left * right > 0
    big_enough = np.maximum(np.abs(left), np.abs(right)) >= threshold
    return int(np.count_nonzero(turning & big_enough))


@dataclass
class FeatureFrameSeries:
    """Per-frame feature vectors, channel-major: (MAV, WL, ZC, SSC) for
    channel 0, then channel 1, ..."""

    features: np.ndarray  # (frames, 4 * channels)
    spec: FrameSpec
    channel_count: int
    sample_rate: float

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def frame_index(self, ordinal: int) -> FrameIndex:
        start = ordinal * self.spec.increment
        return FrameIndex(ordinal, start, start + self.spec.frame_length)

    def times_ms(self) -> np.ndarray:
        """Decision time of each frame (its end sample), in ms."""
        return self.spec.decision_time_ms(np.arange(len(self)), self.sample_rate)


def extract_features(
    recording: Recording,
    spec: FrameSpec = FrameSpec(),
    zc_threshold: float = 0.0,
    ssc_threshold: float = 0.0,
) -> FeatureFrameSeries:
    """Segment a recording into frames and compute the 4 features per channel.

    A recording shorter than one frame yields an empty series.
    """
    if zc_threshold < 0 or ssc_threshold < 0:
        raise ParameterError("thresholds must be >= 0")
    frames = segment_frames(recording.num_samples, spec)
    channels = recording.channel_count
    out = np.zeros((len(frames), FEATURES_PER_CHANNEL * channels))
    if not frames:
        return FeatureFrameSeries(out, spec, channels, recording.sample_rate)
    starts = np.arange(len(frames)) * spec.increment
    for c in range(channels):
        windows = sliding_window_view(recording.samples[c], spec.frame_length)
        w = windows[starts]  # (frames, frame_length)
        col = FEATURES_PER_CHANNEL * c
        out[:, col] = np.mean(np.abs(w), axis=1)
        steps = np.diff(w, axis=1)
        out[:, col + 1] = np.sum(np.abs(steps), axis=1)
        crossing = (w[:, :-1] * w[:, 1:] < 0) & (np.abs(steps) >= zc_threshold)
        out[:, col + 2] = np.count_nonzero(crossing, axis=1)
        left = w[:, 1:-1] - w[:, :-2]
        right = w[:, 1:-1] - w[:, 2:]
        turning = (left * right > 0) & (
            np.maximum(np.abs(left), np.abs(right)) >= ssc_threshold
        )
        out[:, col + 3] = np.count_nonzero(turning, axis=1)
    return FeatureFrameSeries(out, spec, channels, recording.sample_rate)
