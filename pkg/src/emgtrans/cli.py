"""Command-line interface: generate / run / inspect / report subcommands.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical error.  Report files are written via temp-file-then-rename, so
a nonzero exit never leaves partial artifacts behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import report
from .classify import load_model
from .dataset import (
    MotionClass,
    default_profile,
    generate_continuous_test,
    generate_training_set,
    read_recording,
    write_recording,
)
from .dsp import FrameSpec
from .errors import EvaluationError, FormatError, NumericalError, ParameterError
from .features import extract_features
from .pipeline import (
    ExperimentConfig,
    run_experiment,
    subject_seed,
    trial_seed,
)
from .stream import find_steady_states, majority_vote

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

ENV_OUT_DIR = "EMGTRANS_OUT_DIR"


class _Parser(argparse.ArgumentParser):
    """argparse with the documented usage exit code (1, not argparse's 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _status(msg: str) -> None:
    print(msg, file=sys.stderr)


def _write_recording_atomic(recording, path) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-emgtrans-")
    os.close(fd)
    try:
        write_recording(recording, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_generate(args) -> int:
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for subject in range(args.subjects):
        profile = default_profile(
            subject_seed(args.seed, subject),
            channels=args.channels,
            separation=args.separation,
        )
        if args.sample_rate != profile.sample_rate:
            from dataclasses import replace

            profile = replace(profile, sample_rate=args.sample_rate)
        train = generate_training_set(profile, args.reps, args.rep_duration)
        for i, rec in enumerate(train):
            set_id, cls = i // len(MotionClass), rec.timeline.entries[0][1]
            name = f"sub{subject:02d}_train_set{set_id}_{cls.name}.emgrec"
            _write_recording_atomic(rec, os.path.join(out_dir, name))
            entries.append(
                {"subject": subject, "role": "train", "set": set_id,
                 "class": cls.name, "path": name}
            )
        for trial in range(args.trials):
            rec = generate_continuous_test(
                profile.with_seed(trial_seed(args.seed, subject, trial)),
                args.prompt_duration,
            )
            name = f"sub{subject:02d}_test_trial{trial}.emgrec"
            _write_recording_atomic(rec, os.path.join(out_dir, name))
            entries.append(
                {"subject": subject, "role": "test", "trial": trial, "path": name}
            )
        _status(f"subject {subject}: {len(train)} training + {args.trials} test recordings")
    manifest = {
        "version": 1,
        "subjects": args.subjects,
        "seed": args.seed,
        "params": {
            "channels": args.channels,
            "sample_rate": args.sample_rate,
            "reps": args.reps,
            "rep_duration": args.rep_duration,
            "trials": args.trials,
            "prompt_duration": args.prompt_duration,
            "separation": args.separation,
        },
        "recordings": entries,
    }
    report.write_text_atomic(
        os.path.join(out_dir, "manifest.json"),
        json.dumps(manifest, sort_keys=True, indent=2) + "\n",
    )
    _status(f"wrote {len(entries)} recordings + manifest to {out_dir}")
    return EXIT_OK


def _load_config(args) -> ExperimentConfig:
    base = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot parse config {args.config!r}: {exc}") from None
        if not isinstance(base, dict):
            raise ParameterError(f"config {args.config!r} must hold a JSON object")
    overrides = {
        "subjects": args.subjects,
        "seed": args.seed,
        "metric_mode": args.metric_mode,
        "test_trials": args.trials,
        "data_dir": args.data_dir,
    }
    if args.classifiers is not None:
        overrides["classifiers"] = [
            c.strip().lower() for c in args.classifiers.split(",") if c.strip()
        ]
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    return ExperimentConfig.from_dict(base)


def cmd_run(args) -> int:
    config = _load_config(args)
    _status(
        f"running {config.subjects} subjects x {len(config.classifiers)} "
        f"classifiers ({', '.join(config.classifiers)})"
    )
    result = run_experiment(config)
    d = report.result_to_dict(result)
    written = report.write_report_files(d, args.out_dir)
    print(report.render_text_tables(d))
    _status(f"wrote {len(written)} report files to {args.out_dir}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    recording = read_recording(args.recording)
    model = load_model(args.model)
    config = ExperimentConfig(
        subjects=1,
        classifiers=("lda",),
        frame_length=args.frame_length,
        increment=args.increment,
        mv_window=args.mv_window,
        mv_delay_frames=args.mv_delay,
        channels=recording.channel_count,
        sample_rate=recording.sample_rate,
        notch_centers=(),
    )
    if model.dim != 4 * recording.channel_count:
        raise ParameterError(
            f"model dimension {model.dim} does not match recording with "
            f"{recording.channel_count} channels"
        )
    series = extract_features(recording, config.frame_spec)
    if len(series) == 0:
        raise EvaluationError("recording shorter than one frame")
    from .classify import predict_stream

    raw = predict_stream(model, series)
    smoothed = majority_vote(raw, config.mv_window)
    labeling = find_steady_states(smoothed, recording.timeline, config.mv_delay_frames)
    kinds = np.full(len(raw), "margin", dtype=object)
    for span in labeling.steady:
        kinds[span.start_frame:span.end_frame] = "steady"
    for span in labeling.transitions:
        kinds[span.start_frame:span.end_frame] = "transition"
    times = raw.times_ms()
    keep = np.ones(len(raw), dtype=bool)
    if args.start_s is not None:
        keep &= times >= args.start_s * 1000.0
    if args.end_s is not None:
        keep &= times < args.end_s * 1000.0
    if args.transition is not None:
        if not 0 <= args.transition < len(labeling.transitions):
            raise ParameterError(
                f"transition index {args.transition} out of range "
                f"(0..{len(labeling.transitions) - 1})"
            )
        span = labeling.transitions[args.transition]
        lo = max(0, span.start_frame - args.margin)
        hi = min(len(raw), span.end_frame + args.margin)
        window = np.zeros(len(raw), dtype=bool)
        window[lo:hi] = True
        keep &= window
    lines = ["frame,time_ms,decision,confidence,prompt,span_kind"]
    for i in np.flatnonzero(keep):
        prompt = recording.timeline.class_at(times[i] / 1000.0)
        lines.append(
            f"{i},{times[i]!r},{MotionClass(int(raw.classes[i])).name},"
            f"{raw.confidences[i]!r},{prompt.name},{kinds[i]}"
        )
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        report.write_text_atomic(args.out, text)
        _status(f"wrote {int(keep.sum())} frames to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    d = report.load_result_dict(args.result)
    if args.out_dir is not None:
        written = report.write_report_files(d, args.out_dir)
        _status(f"wrote {len(written)} report files to {args.out_dir}")
    print(report.render_text_tables(d))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(
        prog="emgtrans",
        description="Offline evaluation of continuous class transitions in "
        "myoelectric pattern recognition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    default_out = os.environ.get(ENV_OUT_DIR)

    p = sub.add_parser("generate", help="write synthetic recordings + manifest")
    p.add_argument("--subjects", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=default_out, required=default_out is None)
    p.add_argument("--reps", type=int, default=4)
    p.add_argument("--rep-duration", type=float, default=3.0)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--prompt-duration", type=float, default=3.0)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--sample-rate", type=float, default=1000.0)
    p.add_argument("--separation", type=float, default=1.0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the full experiment and write reports")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--out-dir", default=default_out, required=default_out is None)
    p.add_argument("--subjects", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--classifiers", help="comma-separated kinds, e.g. lda,qda,knn")
    p.add_argument("--metric-mode", choices=("raw", "smoothed"))
    p.add_argument("--trials", type=int)
    p.add_argument("--data-dir", help="evaluate recordings from a generated directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("inspect", help="per-frame decision CSV for one recording")
    p.add_argument("--recording", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--start-s", type=float)
    p.add_argument("--end-s", type=float)
    p.add_argument("--transition", type=int, help="limit to one transition span")
    p.add_argument("--margin", type=int, default=25, help="context frames around span")
    p.add_argument("--frame-length", type=int, default=160)
    p.add_argument("--increment", type=int, default=16)
    p.add_argument("--mv-window", type=int, default=9)
    p.add_argument("--mv-delay", type=int, default=4)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("report", help="re-render tables from a saved result")
    p.add_argument("--result", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        _status(f"error: {exc}")
        return EXIT_USAGE
    except (FormatError, EvaluationError) as exc:
        _status(f"data error: {exc}")
        return EXIT_DATA
    except FileNotFoundError as exc:
        _status(f"data error: {exc}")
        return EXIT_DATA
    except OSError as exc:
        _status(f"data error: {exc}")
        return EXIT_DATA
    except NumericalError as exc:
        _status(f"numerical error: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
