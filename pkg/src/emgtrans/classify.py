"""Discriminant and nearest-neighbour classifiers with leave-one-set-out CV.

LDA/QDA are Gaussian discriminants: the per-class score is the full
multivariate normal log-likelihood at the class mean/covariance plus the log
prior, with a pooled covariance for LDA and per-class covariances for QDA.
Confidences are softmax-normalized scores (posteriors under the priors).
KNN scores are vote fractions over the k nearest training points.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .dataset import MotionClass
from .errors import FormatError, NumericalError, ParameterError
from .features import FeatureFrameSeries

DEFAULT_REGULARIZATION = 1e-6  # ridge relative to the mean covariance diagonal
DEFAULT_KNN_K = 5

KIND_LDA = "lda"
KIND_QDA = "qda"
KIND_KNN = "knn"
IMPLEMENTED_KINDS = (KIND_LDA, KIND_QDA, KIND_KNN)

_LOG_2PI = math.log(2.0 * math.pi)


class MissingClassWarning(UserWarning):
    """A cross-validation fold is missing a class present elsewhere."""


@dataclass
class LabeledDataset:
    """Feature vectors with class labels and training-set ids."""

    x: np.ndarray  # (n, dim)
    y: np.ndarray  # (n,) MotionClass values
    set_ids: np.ndarray  # (n,)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.set_ids = np.asarray(self.set_ids, dtype=np.int64)
        if self.x.ndim != 2:
            raise ParameterError("x must be a (samples, features) matrix")
        n = self.x.shape[0]
        if self.y.shape != (n,) or self.set_ids.shape != (n,):
            raise ParameterError("x, y, and set_ids must have matching lengths")
        if len(np.unique(self.y)) < 2:
            raise ParameterError("dataset must contain at least 2 classes")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def classes(self) -> tuple[MotionClass, ...]:
        return tuple(MotionClass(v) for v in np.unique(self.y))

    def subset(self, mask: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.x[mask], self.y[mask], self.set_ids[mask])


@dataclass
class Decision:
    """One classification decision with normalized per-class scores."""

    cls: MotionClass
    confidence: float
    scores: np.ndarray
    classes: tuple[MotionClass, ...]


@dataclass
class ClassifierModel:
    kind: str
    classes: tuple[MotionClass, ...]
    dim: int


@dataclass
class GaussianModel(ClassifierModel):
    """LDA (pooled covariance) or QDA (per-class) discriminant parameters.

    precisions has shape (1, d, d) for LDA and (k, d, d) for QDA; logdets
    matches its first axis.
    """

    means: np.ndarray = field(default=None)
    precisions: np.ndarray = field(default=None)
    logdets: np.ndarray = field(default=None)
    priors: np.ndarray = field(default=None)

    def discriminants(self, x: np.ndarray) -> np.ndarray:
        """Per-class Gaussian log-likelihood + log prior, shape (n, k)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.dim:
            raise ParameterError(
                f"feature dimension {x.shape[1]} does not match model ({self.dim})"
            )
        k = len(self.classes)
        out = np.empty((x.shape[0], k))
        for i in range(k):
            p = self.precisions[0] if self.precisions.shape[0] == 1 else self.precisions[i]
            logdet = self.logdets[0] if self.logdets.shape[0] == 1 else self.logdets[i]
            d = x - self.means[i]
            quad = np.einsum("nd,de,ne->n", d, p, d)
            out[:, i] = -0.5 * (quad + logdet + self.dim * _LOG_2PI)
        return out + np.log(self.priors)


@dataclass
class KnnModel(ClassifierModel):
    train_x: np.ndarray = field(default=None)
    train_y: np.ndarray = field(default=None)
    k: int = DEFAULT_KNN_K


def _regularized_cholesky(cov: np.ndarray, regularization: float, label: str):
    dim = cov.shape[0]
    ridge = regularization * np.trace(cov) / dim
    reg_cov = cov + ridge * np.eye(dim)
    try:
        chol = np.linalg.cholesky(reg_cov)
    except np.linalg.LinAlgError:
        eigs = np.linalg.eigvalsh(reg_cov)
        cond = np.inf if eigs.min() <= 0 else eigs.max() / eigs.min()
        raise NumericalError(
            f"{label} covariance is singular after regularization "
            f"{regularization!r} (eigenvalue range [{eigs.min():.3e}, "
            f"{eigs.max():.3e}], condition {cond:.3e})"
        ) from None
    precision = sla.cho_solve((chol, True), np.eye(dim))
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return precision, logdet


def train_lda(
    data: LabeledDataset, regularization: float = DEFAULT_REGULARIZATION
) -> GaussianModel:
    """Linear discriminant: per-class means, pooled within-class covariance
    (weighted by class sample counts), equal priors."""
    classes = data.classes()
    k = len(classes)
    dim = data.dim
    means = np.empty((k, dim))
    scatter = np.zeros((dim, dim))
    for i, cls in enumerate(classes):
        xc = data.x[data.y == cls]
        means[i] = xc.mean(axis=0)
        centered = xc - means[i]
        scatter += centered.T @ centered
    pooled = scatter / max(len(data) - k, 1)
    precision, logdet = _regularized_cholesky(pooled, regularization, "pooled")
    return GaussianModel(
        kind=KIND_LDA,
        classes=classes,
        dim=dim,
        means=means,
        precisions=precision[None],
        logdets=np.array([logdet]),
        priors=np.full(k, 1.0 / k),
    )


def train_qda(
    data: LabeledDataset, regularization: float = DEFAULT_REGULARIZATION
) -> GaussianModel:
    """Quadratic discriminant: as LDA but one covariance per class."""
    classes = data.classes()
    k = len(classes)
    dim = data.dim
    means = np.empty((k, dim))
    precisions = np.empty((k, dim, dim))
    logdets = np.empty(k)
    for i, cls in enumerate(classes):
        xc = data.x[data.y == cls]
        means[i] = xc.mean(axis=0)
        centered = xc - means[i]
        cov = centered.T @ centered / max(len(xc) - 1, 1)
        precisions[i], logdets[i] = _regularized_cholesky(
            cov, regularization, cls.name
        )
    return GaussianModel(
        kind=KIND_QDA,
        classes=classes,
        dim=dim,
        means=means,
        precisions=precisions,
        logdets=logdets,
        priors=np.full(k, 1.0 / k),
    )


def train_knn(data: LabeledDataset, k: int = DEFAULT_KNN_K) -> KnnModel:
    """Store the training data verbatim for k-nearest-neighbour voting."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    if k > len(data):
        raise ParameterError(f"k={k} exceeds dataset size {len(data)}")
    return KnnModel(
        kind=KIND_KNN,
        classes=data.classes(),
        dim=data.dim,
        train_x=data.x.copy(),
        train_y=data.y.copy(),
        k=int(k),
    )


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _knn_neighbors(model: KnnModel, x: np.ndarray) -> np.ndarray:
    """Indices of the k nearest training points per query, ordered by
    distance then training index (stable under distance ties)."""
    train = model.train_x
    k = model.k
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * (x @ train.T)
        + np.sum(train * train, axis=1)[None, :]
    )
    n = x.shape[0]
    if k >= train.shape[0]:
        sel = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return sel
    part = np.argpartition(d2, k - 1, axis=1)[:, :k]
    rows = np.arange(n)[:, None]
    sel_d = d2[rows, part]
    order = np.lexsort((part, sel_d), axis=1)
    sel = np.take_along_axis(part, order, axis=1)
    # argpartition may split distance ties at the k-boundary arbitrarily;
    # redo those rows with a stable full sort
    vmax = sel_d.max(axis=1)
    ambiguous = np.count_nonzero(d2 <= vmax[:, None], axis=1) > k
    for r in np.flatnonzero(ambiguous):
        sel[r] = np.argsort(d2[r], kind="stable")[:k]
    return sel


def _knn_scores(model: KnnModel, x: np.ndarray):
    """Vote-fraction scores plus per-row tie-broken winners."""
    neighbors = _knn_neighbors(model, x)
    class_values = np.array([int(c) for c in model.classes])
    slot = np.searchsorted(class_values, model.train_y[neighbors])
    n = x.shape[0]
    counts = np.zeros((n, len(model.classes)))
    np.add.at(counts, (np.arange(n)[:, None], slot), 1.0)
    winners = np.argmax(counts, axis=1)
    top = counts[np.arange(n), winners]
    tied_rows = np.flatnonzero((counts == top[:, None]).sum(axis=1) > 1)
    for r in tied_rows:
        tied = counts[r] == top[r]
        for s in slot[r]:  # nearest tied class wins
            if tied[s]:
                winners[r] = s
                break
    return counts / model.k, winners


def predict_batch(model: ClassifierModel, x: np.ndarray):
    """Classify a batch: (class values, confidences, score matrix)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise ParameterError(
            f"feature dimension {x.shape[1]} does not match model ({model.dim})"
        )
    if isinstance(model, GaussianModel):
        scores = _softmax(model.discriminants(x))
        winners = np.argmax(scores, axis=1)
    elif isinstance(model, KnnModel):
        scores, winners = _knn_scores(model, x)
    else:
        raise ParameterError(f"cannot predict with model kind {model.kind!r}")
    class_values = np.array([int(c) for c in model.classes])
    confidences = scores[np.arange(x.shape[0]), winners]
    return class_values[winners], confidences, scores


def predict(model: ClassifierModel, x: np.ndarray) -> Decision:
    """Classify one feature vector."""
    classes, confidences, scores = predict_batch(model, np.atleast_2d(x))
    return Decision(
        cls=MotionClass(int(classes[0])),
        confidence=float(confidences[0]),
        scores=scores[0],
        classes=model.classes,
    )


def predict_stream(model: ClassifierModel, series: FeatureFrameSeries):
    """Classify every frame of a series, preserving order.

    Returns a stream.DecisionStream (imported lazily to avoid a cycle).
    """
    from .stream import DecisionStream

    if len(series) == 0:
        raise ParameterError("cannot predict on an empty series")
    classes, confidences, _ = predict_batch(model, series.features)
    return DecisionStream(
        classes=classes,
        confidences=confidences,
        spec=series.spec,
        sample_rate=series.sample_rate,
    )


@dataclass
class LosoResult:
    """Leave-one-set-out offline training error (TER, percent)."""

    set_ids: list[int]
    fold_ter: list[float]
    mean_ter: float
    warnings: list[str]


def leave_one_set_out(data: LabeledDataset, trainer) -> LosoResult:
    """Hold out each set_id in turn: train on the rest, test on it.

    trainer is a callable LabeledDataset -> model.  Fold error is the
    percentage of misclassified held-out samples; the mean across folds is
    the offline training error.
    """
    set_ids = sorted(int(s) for s in np.unique(data.set_ids))
    if len(set_ids) < 2:
        raise ParameterError("leave-one-set-out needs at least 2 sets")
    all_classes = set(data.classes())
    fold_ter = []
    notes = []
    for held_out in set_ids:
        mask = data.set_ids == held_out
        train_part = data.subset(~mask)
        for name, part in (("training", train_part.y), ("held-out", data.y[mask])):
            missing = all_classes - {MotionClass(v) for v in np.unique(part)}
            if missing:
                msg = (
                    f"fold {held_out}: {name} part is missing "
                    f"{sorted(c.name for c in missing)}"
                )
                warnings.warn(msg, MissingClassWarning, stacklevel=2)
                notes.append(msg)
        model = trainer(train_part)
        predicted, _, _ = predict_batch(model, data.x[mask])
        fold_ter.append(100.0 * float(np.mean(predicted != data.y[mask])))
    return LosoResult(
        set_ids=set_ids,
        fold_ter=fold_ter,
        mean_ter=float(np.mean(fold_ter)),
        warnings=notes,
    )


# ---------------------------------------------------------------------------
# Model serialization: versioned text format, load(save(m)) == m to 1e-12
# ---------------------------------------------------------------------------

_MODEL_MAGIC = "EMGMODEL 1"


def _matrix_lines(m: np.ndarray) -> list[str]:
    return [",".join(repr(v) for v in row) for row in np.atleast_2d(m).tolist()]


def save_model(model: ClassifierModel, path) -> None:
    lines = [
        _MODEL_MAGIC,
        f"kind: {model.kind}",
        "classes: " + ",".join(c.name for c in model.classes),
        f"dim: {model.dim}",
    ]
    if isinstance(model, GaussianModel):
        lines.append("priors: " + ",".join(repr(v) for v in model.priors.tolist()))
        lines.append("logdets: " + ",".join(repr(v) for v in model.logdets.tolist()))
        lines.append("[means]")
        lines += _matrix_lines(model.means)
        for i in range(model.precisions.shape[0]):
            lines.append(f"[precision {i}]")
            lines += _matrix_lines(model.precisions[i])
    elif isinstance(model, KnnModel):
        lines.append(f"k: {model.k}")
        lines.append("labels: " + ",".join(str(int(v)) for v in model.train_y))
        lines.append("[vectors]")
        lines += _matrix_lines(model.train_x)
    else:
        raise ParameterError(f"cannot serialize model kind {model.kind!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> ClassifierModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MODEL_MAGIC:
        raise FormatError(f"line 1: expected {_MODEL_MAGIC!r} header")

    def header(idx, key):
        if idx >= len(lines) or not lines[idx].startswith(key + ":"):
            raise FormatError(f"line {idx + 1}: expected header field {key!r}")
        return lines[idx][len(key) + 1:].strip()

    kind = header(1, "kind")
    try:
        classes = tuple(MotionClass[n] for n in header(2, "classes").split(","))
    except KeyError as exc:
        raise FormatError(f"classes: unknown class name {exc}") from None
    dim = int(header(3, "dim"))

    def parse_matrix(start, rows, cols, label):
        if start + rows > len(lines):
            raise FormatError(f"{label}: expected {rows} rows")
        out = np.empty((rows, cols))
        for r in range(rows):
            parts = lines[start + r].split(",")
            if len(parts) != cols:
                raise FormatError(
                    f"line {start + r + 1}: expected {cols} values in {label}"
                )
            out[r] = [float(p) for p in parts]
        return out

    k = len(classes)
    if kind in (KIND_LDA, KIND_QDA):
        priors = np.array([float(v) for v in header(4, "priors").split(",")])
        logdets = np.array([float(v) for v in header(5, "logdets").split(",")])
        if lines[6] != "[means]":
            raise FormatError("line 7: expected [means] section")
        means = parse_matrix(7, k, dim, "means")
        nprec = len(logdets)
        precisions = np.empty((nprec, dim, dim))
        pos = 7 + k
        for i in range(nprec):
            if pos >= len(lines) or lines[pos] != f"[precision {i}]":
                raise FormatError(f"line {pos + 1}: expected [precision {i}]")
            precisions[i] = parse_matrix(pos + 1, dim, dim, f"precision {i}")
            pos += 1 + dim
        return GaussianModel(
            kind=kind,
            classes=classes,
            dim=dim,
            means=means,
            precisions=precisions,
            logdets=logdets,
            priors=priors,
        )
    if kind == KIND_KNN:
        kk = int(header(4, "k"))
        labels = np.array([int(v) for v in header(5, "labels").split(",")])
        if lines[6] != "[vectors]":
            raise FormatError("line 7: expected [vectors] section")
        vectors = parse_matrix(7, len(labels), dim, "vectors")
        return KnnModel(
            kind=kind,
            classes=classes,
            dim=dim,
            train_x=vectors,
            train_y=labels,
            k=kk,
        )
    raise FormatError(f"kind: unknown model kind {kind!r}")
