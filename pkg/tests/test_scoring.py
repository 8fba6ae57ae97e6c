import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bzscr.data import DivergenceMatrix, LabelEmbeddings, Dataset, cosine_divergence
from bzscr.errors import LoadError, ValidationError
from bzscr.scoring import (
    Ensemble,
    WeakModel,
    compute_margins,
    ensemble_score,
    load_model,
    predict,
    predict_batch,
    save_model,
    score_matrix,
    weak_score,
)


def random_unit(rng, n):
    a = rng.standard_normal(n)
    return a / np.linalg.norm(a)


def random_ensemble(rng, K, m, d):
    models = [WeakModel(random_unit(rng, m), random_unit(rng, d)) for _ in range(K)]
    return Ensemble(models, rng.uniform(0, 2, K), m, d)


@pytest.fixture
def toy():
    rng = np.random.default_rng(0)
    E = LabelEmbeddings(rng.standard_normal((5, 3)))
    data = Dataset(rng.standard_normal((8, 4)), rng.integers(1, 6, 8))
    return rng, E, data, cosine_divergence(E)


class TestWeakModel:
    def test_requires_unit_norm(self):
        with pytest.raises(ValidationError):
            WeakModel([1.0, 1.0], [1.0, 0.0])

    def test_orthogonal_input_scores_zero(self):
        E = LabelEmbeddings([[1.0, 2.0], [3.0, -1.0]])
        h = WeakModel([1.0, 0.0, 0.0], [0.6, 0.8])
        assert weak_score(h, np.array([0.0, 2.0, -1.0]), 2, E) == 0.0

    def test_cauchy_schwarz_equality(self):
        x = np.array([3.0, 4.0, 0.0])
        E = LabelEmbeddings([[1.0, 2.0], [2.0, -2.0]])
        h = WeakModel.from_vectors(x, E[2])
        assert weak_score(h, x, 2, E) == pytest.approx(np.linalg.norm(x) * np.linalg.norm(E[2]), rel=1e-14)

    def test_matches_double_inner_product(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            x, u, v = rng.standard_normal(3), random_unit(rng, 3), random_unit(rng, 3)
            E = LabelEmbeddings(rng.standard_normal((2, 3)))
            expected = sum(x[a] * u[a] for a in range(3)) * sum(v[b] * E[1][b] for b in range(3))
            assert abs(weak_score(WeakModel(u, v), x, 1, E) - expected) < 1e-12


class TestEnsembleScore:
    def test_empty_is_zero(self, toy):
        rng, E, data, _ = toy
        ens = Ensemble(feature_dim=4, embed_dim=3)
        assert ensemble_score(ens, data.features[0], 3, E) == 0.0
        assert not np.any(score_matrix(ens, data.features, E))

    def test_linear_in_weights(self, toy):
        rng, E, data, _ = toy
        ens = random_ensemble(rng, 3, 4, 3)
        F = score_matrix(ens, data.features, E)
        F2 = score_matrix(ens.with_weights(2 * ens.weights), data.features, E)
        np.testing.assert_allclose(F2, 2 * F, rtol=1e-14)

    def test_matches_naive_sum(self, toy):
        rng, E, data, _ = toy
        ens = random_ensemble(rng, 3, 4, 3)
        for i in range(data.n_samples):
            for r in range(1, 6):
                naive = sum(w * weak_score(h, data.features[i], r, E)
                            for w, h in zip(ens.weights, ens.models))
                assert abs(ensemble_score(ens, data.features[i], r, E) - naive) < 1e-12

    def test_negative_weights_rejected(self):
        h = WeakModel([1.0], [1.0])
        with pytest.raises(ValidationError):
            Ensemble([h], [-0.1])


class TestMargins:
    def test_empty_ensemble_margins_are_divergence(self, toy):
        rng, E, data, D = toy
        mm = compute_margins(Ensemble(feature_dim=4, embed_dim=3), data, E, D)
        np.testing.assert_array_equal(mm.rho, D.matrix[data.labels - 1])

    def test_true_class_column_zero(self, toy):
        rng, E, data, D = toy
        mm = compute_margins(random_ensemble(rng, 4, 4, 3), data, E, D)
        assert np.all(mm.rho[np.arange(data.n_samples), data.labels - 1] == 0)

    def test_scalar_loop_oracle(self, toy):
        rng, E, data, D = toy
        ens = random_ensemble(rng, 4, 4, 3)
        mm = compute_margins(ens, data, E, D)
        for i in range(data.n_samples):
            y = data.labels[i]
            for r in range(1, 6):
                want = (ensemble_score(ens, data.features[i], r, E)
                        - ensemble_score(ens, data.features[i], y, E) + D(y, r))
                assert abs(mm.rho[i, r - 1] - want) < 1e-10


class TestPredict:
    def test_single_candidate(self, toy):
        rng, E, data, _ = toy
        assert predict(random_ensemble(rng, 2, 4, 3), data.features[0], E, [4]) == 4

    def test_tie_break_lowest(self):
        E = LabelEmbeddings(np.random.default_rng(1).standard_normal((8, 3)))
        assert predict(Ensemble(feature_dim=4, embed_dim=3), np.ones(4), E, {7, 3}) == 3

    def test_exhaustive_oracle(self, toy):
        rng, E, data, _ = toy
        ens = random_ensemble(rng, 5, 4, 3)
        cands = [3, 4, 5]
        for x in data.features:
            scores = {r: ensemble_score(ens, x, r, E) for r in cands}
            best = max(cands, key=lambda r: (scores[r], -r))
            assert predict(ens, x, E, cands) == best

    def test_empty_candidates(self, toy):
        rng, E, data, _ = toy
        with pytest.raises(ValidationError):
            predict(Ensemble(feature_dim=4, embed_dim=3), data.features[0], E, [])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(1e-3, 1e3), K=st.integers(1, 5))
def test_prediction_scale_invariant_and_zero_weight_append(seed, c, K):
    rng = np.random.default_rng(seed)
    E = LabelEmbeddings(rng.standard_normal((6, 3)))
    data = Dataset(rng.standard_normal((10, 4)), rng.integers(1, 7, 10))
    D = cosine_divergence(E)
    ens = random_ensemble(rng, K, 4, 3)
    p = predict_batch(ens, data.features, E, range(1, 7))
    F = score_matrix(ens, data.features, E)
    top2 = np.sort(F, axis=1)[:, -2:]
    if np.all(top2[:, 1] - top2[:, 0] > 1e-9 * (1 + np.abs(F).max())):
        scaled = predict_batch(ens.with_weights(c * ens.weights), data.features, E, range(1, 7))
        np.testing.assert_array_equal(scaled, p)
    grown = ens.append(WeakModel(random_unit(rng, 4), random_unit(rng, 3)), 0.0)
    np.testing.assert_array_equal(score_matrix(grown, data.features, E), F)
    np.testing.assert_array_equal(compute_margins(grown, data, E, D).rho, compute_margins(ens, data, E, D).rho)
    np.testing.assert_array_equal(predict_batch(grown, data.features, E, range(1, 7)), p)


class TestModelFile:
    def test_round_trip(self, tmp_path, toy):
        rng, E, data, _ = toy
        ens = random_ensemble(rng, 3, 4, 3)
        save_model(tmp_path / "model.json", ens)
        ens2 = load_model(tmp_path / "model.json")
        assert np.array_equal(ens2.weights, ens.weights)
        assert np.array_equal(ens2.U, ens.U) and np.array_equal(ens2.V, ens.V)
        assert (ens2.feature_dim, ens2.embed_dim) == (4, 3)

    def test_empty_round_trip(self, tmp_path):
        save_model(tmp_path / "m.json", Ensemble(feature_dim=4, embed_dim=3))
        ens = load_model(tmp_path / "m.json")
        assert len(ens) == 0 and ens.feature_dim == 4

    def test_missing(self, tmp_path):
        with pytest.raises(LoadError):
            load_model(tmp_path / "nope.json")
