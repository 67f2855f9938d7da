import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emgtrans.dataset import MotionClass, PromptTimeline, Recording
from emgtrans.dsp import FrameSpec, apply_notch_bank, bandstop_filter, segment_frames
from emgtrans.errors import ParameterError

FS = 1000.0


def _sine(freq, duration=5.0, fs=FS):
    t = np.arange(int(duration * fs)) / fs
    return np.sin(2 * np.pi * freq * t)


class TestBandstop:
    def test_60hz_tone_killed(self):
        x = _sine(60.0)
        y = bandstop_filter(x, FS, 60.0)
        assert len(y) == len(x)
        rms_ratio = np.sqrt(np.mean(y**2)) / np.sqrt(np.mean(x**2))
        assert rms_ratio < 0.1

    def test_zeros_to_zeros(self):
        y = bandstop_filter(np.zeros(1000), FS, 60.0)
        assert np.all(y == 0.0)

    def test_passband_untouched(self):
        x = _sine(10.0)
        y = bandstop_filter(x, FS, 60.0)
        rms_ratio = np.sqrt(np.mean(y**2)) / np.sqrt(np.mean(x**2))
        assert abs(rms_ratio - 1.0) < 0.05

    def test_center_above_nyquist_rejected(self):
        with pytest.raises(ParameterError):
            bandstop_filter(np.zeros(100), FS, 600.0)
        with pytest.raises(ParameterError):
            bandstop_filter(np.zeros(100), FS, 500.0)

    def test_bad_order_rejected(self):
        with pytest.raises(ParameterError):
            bandstop_filter(np.zeros(100), FS, 60.0, order=0)

    def test_linearity(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, 2000)
        y = rng.uniform(-1, 1, 2000)
        a, b = 0.7, -1.3
        lhs = bandstop_filter(a * x + b * y, FS, 60.0)
        rhs = a * bandstop_filter(x, FS, 60.0) + b * bandstop_filter(y, FS, 60.0)
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_stability_bounded(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.uniform(-1, 1, 5000)
            for center in (60.0, 180.0, 300.0):
                y = bandstop_filter(x, FS, center)
                assert np.max(np.abs(y)) < 100.0


def _tone_amplitude(x, freq, fs=FS):
    # amplitude of one frequency over the signal tail (transient skipped)
    tail = x[len(x) // 2:]
    t = np.arange(len(tail)) / fs
    c = np.exp(-2j * np.pi * freq * t)
    return 2.0 * abs(np.mean(tail * c))


class TestNotchBank:
    def _recording(self, samples):
        tl = PromptTimeline(((0.0, MotionClass.NM),), 1.0)
        return Recording(samples, FS, tl, "continuous-test")

    def test_all_three_tones_attenuated(self):
        rng = np.random.default_rng(3)
        base = 0.1 * rng.standard_normal((2, 5000))
        tones = _sine(60.0) + _sine(180.0) + _sine(300.0)
        rec = self._recording(base + tones)
        out = apply_notch_bank(rec)
        for freq in (60.0, 180.0, 300.0):
            for ch in range(2):
                before = _tone_amplitude(rec.samples[ch], freq)
                after = _tone_amplitude(out.samples[ch], freq)
                assert after < 0.1 * before  # >= 20 dB down

    def test_metadata_preserved(self):
        rec = self._recording(np.ones((3, 2000)))
        out = apply_notch_bank(rec)
        assert out.timeline == rec.timeline
        assert out.sample_rate == rec.sample_rate
        assert out.kind == rec.kind
        assert out.channel_count == 3

    def test_empty_centers_is_identity(self):
        rng = np.random.default_rng(4)
        rec = self._recording(rng.standard_normal((2, 1000)))
        out = apply_notch_bank(rec, centers=())
        assert np.array_equal(out.samples, rec.samples)

    def test_nyquist_violation(self):
        rec = self._recording(np.zeros((1, 1000)))
        with pytest.raises(ParameterError):
            apply_notch_bank(rec, centers=(600.0,))


class TestSegmentFrames:
    def test_reference_counts(self):
        spec = FrameSpec(160, 16)
        assert len(segment_frames(3000, spec)) == 178
        assert len(segment_frames(160, spec)) == 1
        assert len(segment_frames(159, spec)) == 0

    def test_frame_geometry(self):
        spec = FrameSpec(160, 16)
        frames = segment_frames(1000, spec)
        for f in frames:
            assert f.end_sample - f.start_sample == 160
            assert f.start_sample == f.ordinal * 16
        assert frames[-1].end_sample <= 1000

    def test_spec_validation(self):
        with pytest.raises(ParameterError):
            FrameSpec(0, 1)
        with pytest.raises(ParameterError):
            FrameSpec(10, 0)
        with pytest.raises(ParameterError):
            FrameSpec(10, 11)

    @given(
        length=st.integers(0, 5000),
        frame=st.integers(1, 400),
        inc=st.integers(1, 400),
    )
    @settings(max_examples=200)
    def test_count_formula(self, length, frame, inc):
        if inc > frame:
            return
        spec = FrameSpec(frame, inc)
        frames = segment_frames(length, spec)
        expected = (length - frame) // inc + 1 if length >= frame else 0
        assert len(frames) == expected
        if len(frames) > 1:
            starts = [f.start_sample for f in frames]
            assert all(b - a == inc for a, b in zip(starts, starts[1:]))
        if frames:
            assert frames[-1].end_sample <= length


def test_decision_time_is_end_sample():
    spec = FrameSpec(160, 16)
    assert spec.decision_time_ms(0, 1000.0) == 160.0
    assert spec.decision_time_ms(10, 1000.0) == 320.0
