"""Offline evaluation of continuous class transitions in myoelectric
pattern recognition: synthetic data, Hudgins features, LDA/QDA/KNN,
decision-stream segmentation, steady-state and transition metrics, and
nonparametric statistics."""

from .classify import (
    Decision,
    LabeledDataset,
    leave_one_set_out,
    load_model,
    predict,
    predict_batch,
    predict_stream,
    save_model,
    train_knn,
    train_lda,
    train_qda,
)
from .dataset import (
    KIND_TEST,
    KIND_TRAINING,
    MotionClass,
    PromptTimeline,
    Recording,
    SyntheticSubjectProfile,
    default_profile,
    generate_continuous_test,
    generate_training_set,
    read_recording,
    write_recording,
)
from .dsp import FrameIndex, FrameSpec, apply_notch_bank, bandstop_filter, segment_frames
from .errors import (
    EmgTransError,
    EvaluationError,
    FormatError,
    NumericalError,
    ParameterError,
)
from .features import FeatureFrameSeries, extract_features, mav, ssc, wl, zc
from .metrics import (
    SteadyStateMetrics,
    TransitionMetrics,
    aggregate,
    group_and_aggregate,
    steady_metrics,
    transition_metrics,
)
from .pipeline import ExperimentConfig, ExperimentResult, evaluate_test_set, run_experiment
from .stats import dunn_sidak, kruskal_wallis, pearson
from .stream import (
    DecisionStream,
    SegmentLabeling,
    SteadyStateSpan,
    TransitionSpan,
    compute_delays,
    find_steady_states,
    group_of,
    majority_vote,
)

__version__ = "0.1.0"
