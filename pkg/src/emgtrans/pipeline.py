"""End-to-end experiment orchestration on synthetic subjects.

Per subject: generate (or load) 4 ramped training sets and 3 continuous test
trials, train each classifier on all sets (leave-one-set-out gives the
offline error first), evaluate every test trial, average metrics per
participant and per transition across trials, then aggregate into the report
tables and run the statistical comparisons.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import classify, stats
from .classify import (
    IMPLEMENTED_KINDS,
    LabeledDataset,
    leave_one_set_out,
    predict_stream,
    train_knn,
    train_lda,
    train_qda,
)
from .dataset import (
    MotionClass,
    Recording,
    default_profile,
    generate_continuous_test,
    generate_training_set,
    read_recording,
)
from .dsp import FrameSpec, apply_notch_bank
from .errors import EvaluationError, ParameterError
from .features import extract_features
from .metrics import (
    STEADY_METRIC_NAMES,
    TRANSITION_METRIC_NAMES,
    aggregate,
    steady_metrics,
    transition_metrics,
)
from .stream import TRANSITION_GROUPS, compute_delays, find_steady_states, majority_vote

# classifier kinds the interface accommodates but this package does not ship
_KNOWN_UNIMPLEMENTED = ("svm", "mlp", "ann", "mlp-ann", "rf", "random-forest")

METRIC_MODES = ("raw", "smoothed")


@dataclass(frozen=True)
class ExperimentConfig:
    """Experiment parameters; defaults mirror the reference protocol
    (8 channels at 1 kHz, 160/16-sample frames, 3 s prompts, MV 9 with
    4-frame delay compensation, k=5, alpha 0.05)."""

    subjects: int = 2
    seed: int = 0
    classifiers: tuple[str, ...] = ("lda", "qda", "knn")
    knn_k: int = 5
    regularization: float = 1e-6
    channels: int = 8
    sample_rate: float = 1000.0
    frame_length: int = 160
    increment: int = 16
    train_reps: int = 4
    rep_duration: float = 3.0
    test_trials: int = 3
    prompt_duration: float = 3.0
    mv_window: int = 9
    mv_delay_frames: int = 4
    metric_mode: str = "raw"
    alpha: float = 0.05
    zc_threshold: float = 0.0
    ssc_threshold: float = 0.0
    notch_centers: tuple[float, ...] = (60.0, 180.0, 300.0)
    separation: float = 1.0
    data_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "classifiers", tuple(self.classifiers))
        object.__setattr__(self, "notch_centers", tuple(self.notch_centers))
        for kind in self.classifiers:
            if kind in _KNOWN_UNIMPLEMENTED:
                raise ParameterError(f"classifier kind {kind!r} is not implemented")
            if kind not in IMPLEMENTED_KINDS:
                raise ParameterError(f"unknown classifier kind {kind!r}")
        if not self.classifiers:
            raise ParameterError("at least one classifier is required")
        if len(set(self.classifiers)) != len(self.classifiers):
            raise ParameterError("duplicate classifier kinds")
        if self.subjects < 1:
            raise ParameterError("subjects must be >= 1")
        if self.train_reps < 2:
            raise ParameterError("train_reps must be >= 2 for leave-one-set-out")
        if self.test_trials < 1:
            raise ParameterError("test_trials must be >= 1")
        if self.mv_window < 1 or self.mv_window % 2 == 0:
            raise ParameterError("mv_window must be odd and >= 1")
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if self.metric_mode not in METRIC_MODES:
            raise ParameterError(f"metric_mode must be one of {METRIC_MODES}")

    @property
    def frame_spec(self) -> FrameSpec:
        return FrameSpec(self.frame_length, self.increment)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classifiers"] = list(self.classifiers)
        d["notch_centers"] = list(self.notch_centers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known - {"version"}
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class ExperimentResult:
    config: dict
    provenance: dict
    offline: dict  # classifier -> Stat
    offline_per_subject: dict  # classifier -> {subject: ter}
    steady: dict  # classifier -> metric -> Stat
    transition: dict  # group -> classifier -> metric -> Stat
    statistics: dict


def make_trainer(kind: str, config: ExperimentConfig):
    if kind == classify.KIND_LDA:
        return lambda data: train_lda(data, config.regularization)
    if kind == classify.KIND_QDA:
        return lambda data: train_qda(data, config.regularization)
    if kind == classify.KIND_KNN:
        return lambda data: train_knn(data, config.knn_k)
    if kind in _KNOWN_UNIMPLEMENTED:
        raise ParameterError(f"classifier kind {kind!r} is not implemented")
    raise ParameterError(f"unknown classifier kind {kind!r}")


def subject_seed(base_seed: int, subject: int) -> int:
    return base_seed * 1_000_003 + subject


def trial_seed(base_seed: int, subject: int, trial: int) -> int:
    return subject_seed(base_seed, subject) * 101 + trial + 1


def recording_hash(recording: Recording) -> str:
    h = hashlib.sha256()
    h.update(recording.samples.tobytes())
    h.update(repr(recording.timeline.entries).encode())
    h.update(repr(recording.sample_rate).encode())
    return h.hexdigest()[:16]


def config_hash(config: ExperimentConfig) -> str:
    text = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def training_dataset(config: ExperimentConfig, recordings) -> LabeledDataset:
    """Feature dataset from set-major training recordings; every frame of a
    repetition carries the repetition's prompted class."""
    xs, ys, sets = [], [], []
    for i, rec in enumerate(recordings):
        series = extract_features(
            rec, config.frame_spec, config.zc_threshold, config.ssc_threshold
        )
        if len(series) == 0:
            raise EvaluationError("training recording shorter than one frame")
        cls = rec.timeline.entries[0][1]
        xs.append(series.features)
        ys.append(np.full(len(series), int(cls)))
        sets.append(np.full(len(series), i // len(MotionClass)))
    return LabeledDataset(np.vstack(xs), np.concatenate(ys), np.concatenate(sets))


def _evaluate_series(model, series, timeline, config: ExperimentConfig):
    raw = predict_stream(model, series)
    smoothed = majority_vote(raw, config.mv_window)
    labeling = find_steady_states(smoothed, timeline, config.mv_delay_frames)
    if not labeling.steady:
        raise EvaluationError("all steady states were discarded")
    delays = compute_delays(labeling, timeline, series.spec, series.sample_rate)
    measured = raw if config.metric_mode == "raw" else smoothed
    steady = [steady_metrics(measured, span) for span in labeling.steady]
    transitions = [
        transition_metrics(measured, span, d)
        for span, d in zip(labeling.transitions, delays)
    ]
    return labeling, steady, transitions


def evaluate_test_set(model, recording: Recording, config: ExperimentConfig):
    """Evaluate one trained model on one continuous test recording:
    filter, extract features, predict, smooth, segment, measure."""
    if model.dim != 4 * recording.channel_count:
        raise ParameterError(
            f"model dimension {model.dim} does not match recording with "
            f"{recording.channel_count} channels"
        )
    if config.notch_centers:
        recording = apply_notch_bank(recording, config.notch_centers)
    series = extract_features(
        recording, config.frame_spec, config.zc_threshold, config.ssc_threshold
    )
    if len(series) == 0:
        raise EvaluationError("recording shorter than one frame")
    return _evaluate_series(model, series, recording.timeline, config)


def _subject_recordings(config: ExperimentConfig, subject: int):
    """(training recordings, test recordings) for one subject, generated
    from derived seeds or loaded from the configured data directory."""
    if config.data_dir is None:
        profile = default_profile(
            subject_seed(config.seed, subject),
            channels=config.channels,
            separation=config.separation,
        )
        profile = replace(profile, sample_rate=config.sample_rate)
        train = generate_training_set(profile, config.train_reps, config.rep_duration)
        tests = [
            generate_continuous_test(
                profile.with_seed(trial_seed(config.seed, subject, t)),
                config.prompt_duration,
            )
            for t in range(config.test_trials)
        ]
        return train, tests
    path = os.path.join(config.data_dir, "manifest.json")
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ParameterError(f"no manifest.json in {config.data_dir!r}") from None
    train_entries, test_entries = [], []
    for entry in manifest["recordings"]:
        if entry["subject"] != subject:
            continue
        if entry["role"] == "train":
            train_entries.append(entry)
        else:
            test_entries.append(entry)
    if not train_entries or not test_entries:
        raise ParameterError(f"manifest holds no recordings for subject {subject}")
    train_entries.sort(key=lambda e: (e["set"], MotionClass[e["class"]]))
    test_entries.sort(key=lambda e: e["trial"])
    load = lambda e: read_recording(os.path.join(config.data_dir, e["path"]))
    return [load(e) for e in train_entries], [
        load(e) for e in test_entries[: config.test_trials]
    ]


def _transition_group(pair) -> str:
    if pair[0] == MotionClass.NM:
        return "R2A"
    if pair[1] == MotionClass.NM:
        return "A2R"
    return "A2A"


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the full protocol and aggregate all report tables and statistics.

    Deterministic given the config: identical configs yield identical
    results.  A recording that fails evaluation is logged and excluded;
    remaining recordings proceed.
    """
    spec = config.frame_spec
    classifiers = list(config.classifiers)
    subjects = list(range(config.subjects))
    offline_per_subject = {kind: {} for kind in classifiers}
    # raw per-span values keyed (subject, class) / (subject, pair), pooled
    # over trials so trial averaging happens per participant per transition
    steady_samples = {kind: {} for kind in classifiers}
    trans_samples = {kind: {} for kind in classifiers}
    input_hashes = {}
    failed = []
    loso_notes = []
    discarded_total = 0
    dropped_total = 0
    transitions_evaluated = 0
    test_prompt_seconds = 0.0

    for subject in subjects:
        train_recs, test_recs = _subject_recordings(config, subject)
        if config.notch_centers:
            train_recs = [apply_notch_bank(r, config.notch_centers) for r in train_recs]
            test_recs = [apply_notch_bank(r, config.notch_centers) for r in test_recs]
        dataset = training_dataset(config, train_recs)
        models = {}
        for kind in classifiers:
            trainer = make_trainer(kind, config)
            loso = leave_one_set_out(dataset, trainer)
            loso_notes += [f"subject {subject} {kind}: {w}" for w in loso.warnings]
            offline_per_subject[kind][subject] = loso.mean_ter
            models[kind] = trainer(dataset)
        for trial, rec in enumerate(test_recs):
            series = extract_features(
                rec, spec, config.zc_threshold, config.ssc_threshold
            )
            rec_hash = recording_hash(rec)
            test_prompt_seconds += (len(rec.timeline) - 1) * rec.timeline.prompt_duration
            for kind in classifiers:
                input_hashes.setdefault(f"s{subject}_t{trial}", {})[kind] = rec_hash
                try:
                    labeling, steady, transitions = _evaluate_series(
                        models[kind], series, rec.timeline, config
                    )
                except EvaluationError as exc:
                    failed.append(
                        {"subject": subject, "trial": trial, "classifier": kind,
                         "reason": str(exc)}
                    )
                    continue
                discarded_total += len(labeling.discarded_prompts)
                dropped_total += labeling.dropped_transition_count
                transitions_evaluated += len(transitions)
                for m in steady:
                    key = (subject, int(m.span.cls))
                    steady_samples[kind].setdefault(key, []).append(m.values())
                for m in transitions:
                    key = (subject, (int(m.span.from_cls), int(m.span.to_cls)))
                    trans_samples[kind].setdefault(key, []).append(m.values())

    # one point per (participant, class) / (participant, transition pair):
    # the mean of that unit's values across trials and occurrences
    steady_points = {kind: {} for kind in classifiers}  # metric -> {subject: [v]}
    trans_points = {
        kind: {g: {} for g in TRANSITION_GROUPS} for kind in classifiers
    }  # group -> metric -> {subject: [v]}
    for kind in classifiers:
        for key in sorted(steady_samples[kind]):
            subject, _ = key
            rows = steady_samples[kind][key]
            for name in STEADY_METRIC_NAMES:
                steady_points[kind].setdefault(name, {}).setdefault(
                    subject, []
                ).append(float(np.mean([r[name] for r in rows])))
        for key in sorted(trans_samples[kind]):
            subject, pair = key
            group = _transition_group(pair)
            rows = trans_samples[kind][key]
            for name in TRANSITION_METRIC_NAMES:
                trans_points[kind][group].setdefault(name, {}).setdefault(
                    subject, []
                ).append(float(np.mean([r[name] for r in rows])))

    def flat(by_subject: dict) -> list[float]:
        return [v for s in sorted(by_subject) for v in by_subject[s]]

    offline = {
        kind: aggregate(offline_per_subject[kind].values()) for kind in classifiers
    }
    steady_table = {
        kind: {
            name: aggregate(flat(steady_points[kind][name]))
            for name in STEADY_METRIC_NAMES
            if name in steady_points[kind]
        }
        for kind in classifiers
    }
    transition_table = {}
    for group in TRANSITION_GROUPS:
        rows = {}
        for kind in classifiers:
            pts = trans_points[kind][group]
            if pts:
                rows[kind] = {
                    name: aggregate(flat(pts[name]))
                    for name in TRANSITION_METRIC_NAMES
                }
        transition_table[group] = rows

    statistics = _run_statistics(
        config, classifiers, offline_per_subject, steady_points, trans_points, flat
    )

    provenance = {
        "config_sha256": config_hash(config),
        "metric_mode": config.metric_mode,
        "subject_seeds": {
            str(s): subject_seed(config.seed, s) for s in subjects
        },
        "input_hashes": input_hashes,
        "failed_recordings": failed,
        "loso_warnings": loso_notes,
        "discarded_prompts": discarded_total,
        "dropped_transitions": dropped_total,
        "transitions_evaluated": transitions_evaluated,
        "test_prompt_seconds": test_prompt_seconds,
    }
    return ExperimentResult(
        config=config.to_dict(),
        provenance=provenance,
        offline=offline,
        offline_per_subject=offline_per_subject,
        steady=steady_table,
        transition=transition_table,
        statistics=statistics,
    )


def _kw_block(groups, labels, alpha):
    """KW result dict plus Dunn-Sidak post-hoc when significant."""
    kw = stats.kruskal_wallis(groups)
    block = {
        "groups": list(labels),
        "kw": {
            "h": kw.h,
            "df": kw.df,
            "p": kw.p_value,
            "group_sizes": list(kw.group_sizes),
            "mean_ranks": list(kw.mean_ranks),
        },
        "posthoc": None,
    }
    if kw.p_value < alpha and len(groups) > 1:
        ph = stats.dunn_sidak(groups, alpha)
        block["posthoc"] = {
            "alpha": ph.alpha,
            "m": ph.m,
            "comparisons": [
                {
                    "a": labels[c.a],
                    "b": labels[c.b],
                    "z": c.z,
                    "p_raw": c.p_raw,
                    "p_adjusted": c.p_adjusted,
                    "significant": c.significant,
                }
                for c in ph.comparisons
            ],
        }
    return block


def _run_statistics(
    config, classifiers, offline_per_subject, steady_points, trans_points, flat
):
    """Mirror the reference analysis: KW (+post-hoc) across classifiers per
    metric, KW across transition groups pooled over classifiers, and Pearson
    correlation of offline TER against every test metric."""
    alpha = config.alpha
    out = {"alpha": alpha}

    if len(classifiers) >= 2:
        out["offline"] = _kw_block(
            [list(offline_per_subject[k].values()) for k in classifiers],
            classifiers,
            alpha,
        )
        steady_block = {}
        for name in STEADY_METRIC_NAMES:
            groups = [flat(steady_points[k].get(name, {})) for k in classifiers]
            if all(len(g) > 0 for g in groups):
                steady_block[name] = _kw_block(groups, classifiers, alpha)
        out["steady"] = steady_block
        trans_block = {}
        for group in TRANSITION_GROUPS:
            per_metric = {}
            for name in TRANSITION_METRIC_NAMES:
                groups = [flat(trans_points[k][group].get(name, {})) for k in classifiers]
                if all(len(g) > 0 for g in groups):
                    per_metric[name] = _kw_block(groups, classifiers, alpha)
            if per_metric:
                trans_block[group] = per_metric
        out["transitions"] = trans_block

    group_block = {}
    for name in TRANSITION_METRIC_NAMES:
        groups, labels = [], []
        for group in TRANSITION_GROUPS:
            pooled = []
            for kind in classifiers:
                pooled += flat(trans_points[kind][group].get(name, {}))
            if pooled:
                groups.append(pooled)
                labels.append(group)
        if len(groups) >= 2:
            group_block[name] = _kw_block(groups, labels, alpha)
    out["group_comparison"] = group_block

    # offline TER vs test metrics, one point per (participant, classifier)
    def correlation(by_subject_per_kind):
        xs, ys = [], []
        for kind, by_subject in by_subject_per_kind:
            for s in sorted(by_subject):
                vals = by_subject[s]
                if vals:
                    xs.append(offline_per_subject[kind][s])
                    ys.append(float(np.mean(vals)))
        if len(ys) < 3:
            return None
        try:
            r = stats.pearson(xs, ys)
        except ParameterError:
            return None
        return {"r": r.r, "p": r.p_value, "n": r.n, "significant": r.p_value < alpha}

    steady_corr = {
        name: correlation(
            [(k, steady_points[k].get(name, {})) for k in classifiers]
        )
        for name in STEADY_METRIC_NAMES
    }
    trans_corr = {
        group: {
            name: correlation(
                [(k, trans_points[k][group].get(name, {})) for k in classifiers]
            )
            for name in TRANSITION_METRIC_NAMES
        }
        for group in TRANSITION_GROUPS
    }
    out["correlations"] = {"steady": steady_corr, "transitions": trans_corr}
    return out
