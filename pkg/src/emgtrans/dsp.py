"""Signal conditioning and sliding-window frame segmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .dataset import Recording
from .errors import ParameterError

DEFAULT_NOTCH_CENTERS = (60.0, 180.0, 300.0)
DEFAULT_NOTCH_HALF_WIDTH = 2.0  # -3 dB edges at center +/- 2 Hz
DEFAULT_NOTCH_ORDER = 3


@dataclass(frozen=True)
class FrameSpec:
    """Sliding-window geometry in samples (default 160/16 at 1 kHz: 160 ms
    frames, 16 ms increment)."""

    frame_length: int = 160
    increment: int = 16

    def __post_init__(self):
        if self.frame_length < 1:
            raise ParameterError("frame_length must be >= 1")
        if not 1 <= self.increment <= self.frame_length:
            raise ParameterError("increment must lie in [1, frame_length]")

    def frame_count(self, num_samples: int) -> int:
        if num_samples < self.frame_length:
            return 0
        return (num_samples - self.frame_length) // self.increment + 1

    def decision_time_ms(self, ordinal, sample_rate: float):
        """Decision time of a frame = time of its (causal) end sample."""
        end = np.asarray(ordinal) * self.increment + self.frame_length
        return end * 1000.0 / sample_rate


@dataclass(frozen=True)
class FrameIndex:
    ordinal: int
    start_sample: int
    end_sample: int  # exclusive


def segment_frames(length: int, spec: FrameSpec) -> list[FrameIndex]:
    """Frame indices tiling the signal prefix; empty when too short."""
    count = spec.frame_count(length)
    return [
        FrameIndex(i, i * spec.increment, i * spec.increment + spec.frame_length)
        for i in range(count)
    ]


def design_bandstop(
    sample_rate: float,
    center: float,
    order: int = DEFAULT_NOTCH_ORDER,
    half_width: float = DEFAULT_NOTCH_HALF_WIDTH,
) -> np.ndarray:
    """Butterworth band-stop design as second-order sections."""
    nyquist = sample_rate / 2.0
    if not 0 < center < nyquist:
        raise ParameterError(
            f"center {center} Hz must lie strictly below Nyquist ({nyquist} Hz)"
        )
    if order < 1:
        raise ParameterError("order must be >= 1")
    lo = center - half_width
    hi = center + half_width
    if lo <= 0 or hi >= nyquist:
        raise ParameterError(
            f"stopband [{lo}, {hi}] Hz must lie strictly within (0, {nyquist}) Hz"
        )
    return sps.butter(
        order, [lo, hi], btype="bandstop", fs=sample_rate, output="sos"
    )


def bandstop_filter(
    x: np.ndarray,
    sample_rate: float,
    center: float,
    order: int = DEFAULT_NOTCH_ORDER,
    half_width: float = DEFAULT_NOTCH_HALF_WIDTH,
) -> np.ndarray:
    """Causal (forward-only) band-stop filtering of one channel."""
    sos = design_bandstop(sample_rate, center, order, half_width)
    return sps.sosfilt(sos, np.asarray(x, dtype=np.float64))


def apply_notch_bank(recording: Recording, centers=DEFAULT_NOTCH_CENTERS) -> Recording:
    """Apply band-stop filters at each center to every channel in sequence.

    Timeline and metadata are preserved; an empty center list is the
    identity on samples.
    """
    samples = recording.samples
    for center in centers:
        sos = design_bandstop(recording.sample_rate, center)
        samples = sps.sosfilt(sos, samples, axis=1)
    return Recording(
        np.array(samples), recording.sample_rate, recording.timeline, recording.kind
    )
