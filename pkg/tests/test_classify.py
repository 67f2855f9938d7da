import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import multivariate_normal

from emgtrans.classify import (
    LabeledDataset,
    MissingClassWarning,
    leave_one_set_out,
    load_model,
    predict,
    predict_batch,
    save_model,
    train_knn,
    train_lda,
    train_qda,
)
from emgtrans.dataset import MotionClass
from emgtrans.errors import NumericalError, ParameterError

NM, WF, WE, WP = MotionClass.NM, MotionClass.WF, MotionClass.WE, MotionClass.WP


def _dataset(x, y, sets=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray([int(v) for v in y])
    if sets is None:
        sets = np.zeros(len(y), dtype=int)
    return LabeledDataset(x, y, np.asarray(sets))


def _blobs(rng, classes, n_per, dim, gap, sets=1, scale=1.0):
    """Gaussian blobs with means gap apart along distinct axes."""
    xs, ys, ss = [], [], []
    means = np.zeros((len(classes), dim))
    for i in range(len(classes)):
        means[i, i % dim] = gap * (1 + i // dim)
    for s in range(sets):
        for i, cls in enumerate(classes):
            xs.append(means[i] + scale * rng.standard_normal((n_per, dim)))
            ys.append(np.full(n_per, int(cls)))
            ss.append(np.full(n_per, s))
    return LabeledDataset(np.vstack(xs), np.concatenate(ys), np.concatenate(ss))


class TestLda:
    def test_boundary_at_midpoint(self):
        # 1-D classes with means 0 and 2: equal priors put the boundary at 1
        data = _dataset([-1.0, 1.0, 1.0, 3.0], [NM, NM, WF, WF])
        model = train_lda(data, regularization=0.0)

        def margin(x):
            d = model.discriminants(np.array([[x]]))
            return float(d[0, 0] - d[0, 1])

        root = brentq(margin, 0.0, 2.0)
        assert abs(root - 1.0) < 1e-9
        d = predict(model, np.array([1.0]))
        assert d.scores[0] == pytest.approx(0.5, abs=1e-9)

    def test_label_invariance_under_scaling(self):
        rng = np.random.default_rng(0)
        data = _blobs(rng, [NM, WF, WE], 30, 3, gap=2.0)
        grid = rng.standard_normal((100, 3)) * 3
        base = predict_batch(train_lda(data), grid)[0]
        scaled_data = LabeledDataset(data.x * 10.0, data.y, data.set_ids)
        scaled = predict_batch(train_lda(scaled_data), grid * 10.0)[0]
        assert np.array_equal(base, scaled)

    def test_rank_deficient_without_regularization(self):
        data = _dataset([[0.0, 0.0], [1.0, 1.0]], [NM, WF])
        with pytest.raises(NumericalError):
            train_lda(data, regularization=0.0)

    def test_model_fields(self):
        rng = np.random.default_rng(1)
        data = _blobs(rng, [NM, WF], 20, 2, gap=3.0)
        model = train_lda(data)
        assert model.kind == "lda"
        assert model.precisions.shape == (1, 2, 2)
        assert model.priors == pytest.approx([0.5, 0.5])


class TestQda:
    def test_matches_lda_when_covariances_equal(self):
        rng = np.random.default_rng(2)
        base = rng.standard_normal((40, 2))
        # translate the same point cloud: per-class covariances identical
        x = np.vstack([base, base + [4.0, 1.0], base + [0.0, 5.0]])
        y = [NM] * 40 + [WF] * 40 + [WE] * 40
        data = _dataset(x, y)
        grid = rng.standard_normal((200, 2)) * 4
        lda_labels = predict_batch(train_lda(data), grid)[0]
        qda_labels = predict_batch(train_qda(data), grid)[0]
        assert np.array_equal(lda_labels, qda_labels)

    def test_unequal_variance_boundary(self):
        # means 0 and 4, variances 1 and 100: the boundary sits closer to
        # the low-variance mean than the midpoint
        rng = np.random.default_rng(3)
        a = rng.standard_normal(2000)
        a = (a - a.mean()) / a.std(ddof=1)  # exact mean 0, var 1
        b = rng.standard_normal(2000)
        b = (b - b.mean()) / b.std(ddof=1) * 10.0 + 4.0
        data = _dataset(np.concatenate([a, b]), [NM] * 2000 + [WF] * 2000)
        model = train_qda(data, regularization=0.0)

        def margin(x):
            d = model.discriminants(np.array([[x]]))
            return float(d[0, 0] - d[0, 1])

        root = brentq(margin, 0.5, 3.9)
        # closed-form root of g0(x) = g1(x) for (mean 0, var 1) vs (4, 100):
        # -x^2/2 + (x-4)^2/200 + ln(10) = 0
        coeffs = [-0.5 + 1.0 / 200.0, -8.0 / 200.0, 16.0 / 200.0 + np.log(10.0)]
        expected = max(np.roots(coeffs))
        assert root == pytest.approx(expected, abs=1e-6)
        # the low-variance class wins the midpoint: boundary is not at 2
        assert margin(2.0) > 0
        assert abs(root - 2.0) > 0.05

    def test_zero_variance_feature_without_regularization(self):
        x = np.array([[0.0, 1.0], [0.0, 2.0], [1.0, 1.0], [2.0, 2.0]])
        data = _dataset(x, [NM, NM, WF, WF])
        with pytest.raises(NumericalError):
            train_qda(data, regularization=0.0)


class TestGaussianOracle:
    def test_discriminants_match_naive_log_likelihood(self):
        # independent path: numpy covariance estimation + scipy logpdf
        rng = np.random.default_rng(42)
        reg = 1e-6
        for trial in range(50):
            dim = int(rng.integers(1, 4))
            k = int(rng.integers(2, 4))
            classes = [MotionClass(i) for i in range(k)]
            n_per = int(rng.integers(dim + 2, 50 // k + 1))
            data = _blobs(rng, classes, n_per, dim, gap=float(rng.uniform(1, 4)))
            assert len(data) <= 50
            queries = rng.standard_normal((5, dim)) * 2
            for trainer, pooled in ((train_lda, True), (train_qda, False)):
                model = trainer(data, reg)
                got = model.discriminants(queries)
                want = np.empty_like(got)
                covs = []
                for cls in classes:
                    xc = data.x[data.y == int(cls)]
                    covs.append(np.cov(xc, rowvar=False, ddof=1).reshape(dim, dim))
                if pooled:
                    counts = [np.sum(data.y == int(c)) for c in classes]
                    pooled_cov = sum(
                        (n - 1) * c for n, c in zip(counts, covs)
                    ) / (len(data) - k)
                    covs = [pooled_cov] * k
                for i, cls in enumerate(classes):
                    xc = data.x[data.y == int(cls)]
                    cov = covs[i] + reg * np.trace(covs[i]) / dim * np.eye(dim)
                    want[:, i] = multivariate_normal.logpdf(
                        queries, mean=xc.mean(axis=0), cov=cov
                    ) + np.log(1.0 / k)
                assert np.max(np.abs(got - want)) < 1e-8


class TestKnn:
    def test_exact_point_k1(self):
        data = _dataset([[0, 0], [1, 1], [2, 2]], [NM, WF, WE])
        model = train_knn(data, k=1)
        d = predict(model, np.array([1.0, 1.0]))
        assert d.cls is WF
        assert d.confidence == 1.0

    def test_vote_fractions(self):
        x = [[0, 0], [0.1, 0], [0, 0.1], [5, 5], [5.1, 5]]
        data = _dataset(x, [NM, NM, NM, WF, WF])
        model = train_knn(data, k=5)
        d = predict(model, np.array([0.05, 0.05]))
        assert d.cls is NM
        assert d.confidence == pytest.approx(3 / 5)
        assert d.scores.sum() == pytest.approx(1.0)

    def test_tie_broken_by_nearest(self):
        # symmetric 2-2 vote: WF owns the single nearest point
        x = [[1.0, 0], [3.0, 0], [-1.5, 0], [-2.5, 0]]
        data = _dataset(x, [WF, WF, WE, WE])
        model = train_knn(data, k=4)
        d = predict(model, np.array([0.0, 0.0]))
        assert d.cls is WF
        assert d.confidence == pytest.approx(0.5)

    def test_k_exceeds_dataset(self):
        data = _dataset([[0], [1]], [NM, WF])
        with pytest.raises(ParameterError):
            train_knn(data, k=3)

    def test_default_k_is_five(self):
        rng = np.random.default_rng(4)
        data = _blobs(rng, [NM, WF], 10, 2, gap=4.0)
        assert train_knn(data).k == 5

    def test_k1_zero_training_error(self):
        rng = np.random.default_rng(5)
        data = _blobs(rng, [NM, WF, WE], 15, 2, gap=1.0)
        model = train_knn(data, k=1)
        labels, _, _ = predict_batch(model, data.x)
        assert np.array_equal(labels, data.y)


class TestPredict:
    def test_confidence_at_mean_with_separation(self):
        rng = np.random.default_rng(6)
        data = _blobs(rng, [NM, WF, WE], 50, 2, gap=6.0)
        model = train_lda(data)
        for i, cls in enumerate(model.classes):
            d = predict(model, model.means[i])
            assert d.cls is cls
            assert d.confidence > 0.99

    def test_scores_sum_to_one(self):
        rng = np.random.default_rng(7)
        data = _blobs(rng, [NM, WF, WE, WP], 20, 3, gap=2.0)
        for trainer in (train_lda, train_qda, lambda d: train_knn(d, 5)):
            model = trainer(data)
            _, _, scores = predict_batch(model, rng.standard_normal((50, 3)))
            assert np.allclose(scores.sum(axis=1), 1.0, atol=1e-9)

    def test_dimension_mismatch(self):
        data = _dataset([[0, 0], [1, 1]], [NM, WF])
        model = train_knn(data, k=1)
        with pytest.raises(ParameterError):
            predict(model, np.array([1.0, 2.0, 3.0]))

    def test_repeated_calls_agree(self):
        rng = np.random.default_rng(8)
        data = _blobs(rng, [NM, WF], 20, 2, gap=2.0)
        model = train_qda(data)
        x = rng.standard_normal(2)
        a = predict(model, x)
        b = predict(model, x)
        assert a.cls is b.cls
        assert a.confidence == b.confidence


class TestPredictStream:
    def _series(self, features):
        from emgtrans.dsp import FrameSpec
        from emgtrans.features import FeatureFrameSeries

        return FeatureFrameSeries(
            np.asarray(features, dtype=float), FrameSpec(160, 16), 1, 1000.0
        )

    def test_length_and_order(self):
        from emgtrans.classify import predict_stream

        rng = np.random.default_rng(9)
        data = _blobs(rng, [NM, WF], 30, 4, gap=4.0)
        model = train_lda(data)
        feats = rng.standard_normal((178, 4))
        stream = predict_stream(model, self._series(feats))
        assert len(stream) == 178
        # permutation equivariance (stateless per-frame predictions)
        perm = rng.permutation(178)
        permuted = predict_stream(model, self._series(feats[perm]))
        assert np.array_equal(permuted.classes, stream.classes[perm])

    def test_constant_features_constant_decisions(self):
        from emgtrans.classify import predict_stream

        rng = np.random.default_rng(10)
        data = _blobs(rng, [NM, WF], 30, 4, gap=4.0)
        model = train_knn(data, 5)
        feats = np.tile(rng.standard_normal(4), (20, 1))
        stream = predict_stream(model, self._series(feats))
        assert len(set(stream.classes.tolist())) == 1

    def test_empty_series_rejected(self):
        from emgtrans.classify import predict_stream

        rng = np.random.default_rng(11)
        data = _blobs(rng, [NM, WF], 10, 2, gap=4.0)
        with pytest.raises(ParameterError):
            predict_stream(train_lda(data), self._series(np.zeros((0, 2))))


class TestLeaveOneSetOut:
    def test_separable_data_zero_error(self):
        rng = np.random.default_rng(12)
        data = _blobs(rng, list(MotionClass), 20, 7, gap=8.0, sets=4)
        for trainer in (train_lda, train_qda, lambda d: train_knn(d, 5)):
            result = leave_one_set_out(data, trainer)
            assert result.mean_ter == 0.0
            assert result.set_ids == [0, 1, 2, 3]

    def test_shuffled_labels_hit_chance_level(self):
        rng = np.random.default_rng(13)
        data = _blobs(rng, list(MotionClass), 120, 7, gap=8.0, sets=2)
        shuffled = LabeledDataset(
            data.x, rng.integers(0, 7, size=len(data)), data.set_ids
        )
        result = leave_one_set_out(shuffled, train_lda)
        assert abs(result.mean_ter - 100 * 6 / 7) < 5.0

    def test_single_set_rejected(self):
        rng = np.random.default_rng(14)
        data = _blobs(rng, [NM, WF], 10, 2, gap=4.0, sets=1)
        with pytest.raises(ParameterError):
            leave_one_set_out(data, train_lda)

    def test_missing_class_warns_but_runs(self):
        rng = np.random.default_rng(15)
        data = _blobs(rng, [NM, WF, WE], 10, 2, gap=5.0, sets=2)
        keep = ~((data.set_ids == 1) & (data.y == int(WE)))
        pruned = data.subset(keep)
        with pytest.warns(MissingClassWarning):
            result = leave_one_set_out(pruned, train_lda)
        assert len(result.fold_ter) == 2
        assert result.warnings


class TestSerialization:
    @pytest.mark.parametrize("kind", ["lda", "qda", "knn"])
    def test_round_trip(self, kind, tmp_path):
        rng = np.random.default_rng(16)
        data = _blobs(rng, [NM, WF, WE], 25, 3, gap=2.0)
        trainer = {"lda": train_lda, "qda": train_qda, "knn": train_knn}[kind]
        model = trainer(data)
        path = tmp_path / f"{kind}.emgmodel"
        save_model(model, path)
        back = load_model(path)
        assert back.kind == model.kind
        assert back.classes == model.classes
        queries = rng.standard_normal((40, 3))
        a = predict_batch(model, queries)
        b = predict_batch(back, queries)
        assert np.array_equal(a[0], b[0])
        assert np.allclose(a[2], b[2], atol=1e-12)
        if kind in ("lda", "qda"):
            assert np.allclose(back.means, model.means, atol=1e-12)
            assert np.allclose(back.precisions, model.precisions, atol=1e-12)
