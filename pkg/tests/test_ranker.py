"""Tests for the pairwise feature-difference discriminator."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from stylefuse.corpus import JudgmentSet, PairJudgment
from stylefuse.features import FeatureMatrix, FeatureVector
from stylefuse.ranker import (
    Ranker,
    RankerConfig,
    RankerError,
    ScoreTable,
    cross_validate,
    evaluate_holdout,
    load_ranker,
    load_scores,
    loss_gradient,
    penalized_loss,
    save_ranker,
    save_scores,
    score_pair,
    scored_probability,
    train_ranker,
)


def make_vector(doc_id, **values):
    names = tuple(values)
    return FeatureVector(doc_id=doc_id, names=names, values=dict(values))


def two_feature_ranker(w1, w2):
    return Ranker(
        feature_names=["f1", "f2"],
        weights=np.array([w1, w2]),
        means=np.zeros(2),
        sds=np.ones(2),
    )


class TestScorePair:
    def test_equal_vectors_score_half(self):
        r = two_feature_ranker(0.7, -1.3)
        v = make_vector("a", f1=2.0, f2=-1.0)
        w = make_vector("b", f1=2.0, f2=-1.0)
        assert score_pair(r, v, w) == 0.5

    def test_unit_difference_on_unit_weight(self):
        r = two_feature_ranker(1.0, 0.0)
        a = make_vector("a", f1=1.0, f2=5.0)
        b = make_vector("b", f1=0.0, f2=5.0)
        assert score_pair(r, a, b) == pytest.approx(expit(1.0), abs=1e-12)
        assert score_pair(r, a, b) == pytest.approx(0.7311, abs=1e-4)

    @given(
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(-5, 5),
    )
    @settings(max_examples=50, deadline=None)
    def test_antisymmetry(self, a1, a2, b1, b2):
        r = two_feature_ranker(0.8, -0.4)
        a = make_vector("a", f1=a1, f2=a2)
        b = make_vector("b", f1=b1, f2=b2)
        assert score_pair(r, a, b) + score_pair(r, b, a) == pytest.approx(1.0, abs=1e-12)

    def test_translation_invariance(self):
        r = two_feature_ranker(0.8, -0.4)
        a = make_vector("a", f1=1.0, f2=2.0)
        b = make_vector("b", f1=-1.0, f2=0.5)
        shifted_a = make_vector("a", f1=1.0 + 10.0, f2=2.0 + 3.0)
        shifted_b = make_vector("b", f1=-1.0 + 10.0, f2=0.5 + 3.0)
        assert score_pair(r, shifted_a, shifted_b) == score_pair(r, a, b)

    def test_missing_feature_rejected(self):
        r = two_feature_ranker(1.0, 1.0)
        a = FeatureVector(doc_id="a", names=("f1", "f2"), values={"f1": 1.0, "f2": None})
        b = make_vector("b", f1=0.0, f2=0.0)
        with pytest.raises(RankerError, match="missing"):
            score_pair(r, a, b)

    def test_feature_set_mismatch_rejected(self):
        r = two_feature_ranker(1.0, 1.0)
        a = make_vector("a", f1=1.0)
        b = make_vector("b", f1=0.0, f2=0.0)
        with pytest.raises(RankerError, match="mismatch"):
            score_pair(r, a, b)


def separable_setup(n_docs=40, n_pairs=60, seed=0, noise=0.0):
    """Winner always has the larger f1; f2 is noise."""
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(n_docs, 2))
    values[:, 0] = np.arange(n_docs, dtype=float)  # strictly increasing signal
    doc_ids = [f"d{i}" for i in range(n_docs)]
    std = values.copy()
    means = std.mean(axis=0)
    sds = std.std(axis=0, ddof=1)
    std = (std - means) / sds
    matrix = FeatureMatrix(doc_ids=doc_ids, names=["f1", "f2"], values=std, standardized=True, means=means, sds=sds)
    judgments = []
    for k in range(n_pairs):
        i, j = rng.choice(n_docs, 2, replace=False)
        while abs(i - j) < 3:  # keep a visible margin on the signal feature
            i, j = rng.choice(n_docs, 2, replace=False)
        winner, loser = (i, j) if values[i, 0] > values[j, 0] else (j, i)
        if noise and rng.random() < noise:
            winner, loser = loser, winner
        judgments.append(PairJudgment(f"p{k}", doc_ids[winner], doc_ids[loser], f"t{k % 2}"))
    return JudgmentSet(judgments), matrix


class TestTraining:
    def test_separable_data_learned(self):
        train, matrix = separable_setup(seed=1)
        test, _ = separable_setup(seed=2)
        model = train_ranker(train, matrix, RankerConfig(learning_rate=0.5, epochs=400))
        assert evaluate_holdout(model, test, matrix) >= 0.99

    def test_random_labels_near_chance(self):
        rng = np.random.default_rng(3)
        n_docs = 60
        doc_ids = [f"d{i}" for i in range(n_docs)]
        values = rng.normal(size=(n_docs, 2))
        matrix = FeatureMatrix(
            doc_ids=doc_ids,
            names=["f1", "f2"],
            values=(values - values.mean(axis=0)) / values.std(axis=0, ddof=1),
            standardized=True,
        )
        pairs = []
        for k in range(1600):
            i, j = rng.choice(n_docs, 2, replace=False)
            pairs.append(PairJudgment(f"p{k}", doc_ids[i], doc_ids[j], "t0"))
        train = JudgmentSet(pairs[:600])
        test = JudgmentSet(pairs[600:])
        model = train_ranker(train, matrix, RankerConfig(learning_rate=0.3, epochs=200))
        acc = evaluate_holdout(model, test, matrix)
        assert 0.45 <= acc <= 0.55

    def test_heavy_l2_shrinks_to_chance(self):
        train, matrix = separable_setup(seed=4)
        model = train_ranker(train, matrix, RankerConfig(learning_rate=1e-9, epochs=300, l2=1e8))
        assert np.all(np.abs(model.weights) < 1e-6)
        idx = {d: i for i, d in enumerate(matrix.doc_ids)}
        j = train[0]
        diff = matrix.values[idx[j.a_id]] - matrix.values[idx[j.b_id]]
        assert expit(diff @ model.weights) == pytest.approx(0.5, abs=1e-6)

    def test_loss_never_increases(self):
        train, matrix = separable_setup(seed=5)
        diffs = np.array(
            [
                matrix.values[list(matrix.doc_ids).index(j.a_id)]
                - matrix.values[list(matrix.doc_ids).index(j.b_id)]
                for j in train
            ]
        )
        w = np.zeros(2)
        prev = penalized_loss(w, diffs, 1e-4)
        for _ in range(200):
            w -= 1e-3 * loss_gradient(w, diffs, 1e-4)
            cur = penalized_loss(w, diffs, 1e-4)
            assert cur <= prev + 1e-12
            prev = cur

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        diffs = rng.normal(size=(30, 4))
        worst = 0.0
        for _ in range(20):
            w = rng.normal(size=4)
            g = loss_gradient(w, diffs, 0.01)
            fd = np.empty(4)
            for k in range(4):
                hi, lo = w.copy(), w.copy()
                hi[k] += 1e-7
                lo[k] -= 1e-7
                fd[k] = (penalized_loss(hi, diffs, 0.01) - penalized_loss(lo, diffs, 0.01)) / 2e-7
            worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1.0))))
        assert worst < 1e-6

    def test_deterministic(self):
        train, matrix = separable_setup(seed=7)
        a = train_ranker(train, matrix)
        b = train_ranker(train, matrix)
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_requires_standardized_matrix(self):
        train, matrix = separable_setup(seed=8)
        raw = FeatureMatrix(doc_ids=matrix.doc_ids, names=matrix.names, values=matrix.values)
        with pytest.raises(RankerError, match="standardized"):
            train_ranker(train, raw)

    def test_all_ties_rejected(self):
        _, matrix = separable_setup(seed=9)
        ties = JudgmentSet([PairJudgment("p0", "d0", "d1", "t0", tie=True)])
        with pytest.raises(RankerError, match="non-tied"):
            train_ranker(ties, matrix)

    def test_ties_excluded_from_training(self):
        train, matrix = separable_setup(seed=10)
        with_ties = JudgmentSet(list(train) + [PairJudgment("tie0", "d0", "d1", "t0", tie=True)])
        a = train_ranker(train, matrix)
        b = train_ranker(with_ties, matrix)
        np.testing.assert_array_equal(a.weights, b.weights)


class TestEvaluation:
    def test_perfect_ranker_all_folds_one(self):
        judgments, matrix = separable_setup(n_pairs=80, seed=11)
        accs = cross_validate(judgments, matrix, 5, RankerConfig(learning_rate=0.5, epochs=400))
        assert len(accs) == 5
        assert all(a == 1.0 for a in accs)

    def test_constant_ranker_warns_and_breaks_ties_up(self):
        judgments, matrix = separable_setup(n_pairs=20, seed=12)
        zero = Ranker(feature_names=list(matrix.names), weights=np.zeros(2), means=np.zeros(2), sds=np.ones(2))
        with pytest.warns(RuntimeWarning, match="0.5"):
            acc = evaluate_holdout(zero, judgments, matrix)
        assert acc == 1.0  # tie-break favors the recorded winner slot

    def test_fold_count_validation(self):
        judgments, matrix = separable_setup(seed=13)
        with pytest.raises(RankerError, match="folds"):
            cross_validate(judgments, matrix, 1)

    def test_empty_fold_rejected(self):
        _, matrix = separable_setup(seed=14)
        judgments = JudgmentSet([PairJudgment("p0", "d0", "d1", "t0"), PairJudgment("p1", "d2", "d3", "t0")])
        with pytest.raises(RankerError, match="zero pairs"):
            cross_validate(judgments, matrix, 3)

    def test_stratified_folds_cover_topics(self):
        judgments, matrix = separable_setup(n_pairs=40, seed=15)
        accs = cross_validate(judgments, matrix, 4, RankerConfig(epochs=50))
        assert len(accs) == 4


class TestPersistence:
    def test_round_trip(self, tmp_path):
        train, matrix = separable_setup(seed=16)
        model = train_ranker(train, matrix)
        path = tmp_path / "ranker.json"
        save_ranker(model, path)
        back = load_ranker(path)
        assert back.feature_names == model.feature_names
        np.testing.assert_array_equal(back.weights, model.weights)
        np.testing.assert_array_equal(back.means, model.means)

    def test_nan_stats_survive(self, tmp_path):
        model = Ranker(
            feature_names=["f1", "f2"],
            weights=np.array([0.5, 0.0]),
            means=np.array([1.0, np.nan]),
            sds=np.array([2.0, np.nan]),
        )
        path = tmp_path / "ranker.json"
        save_ranker(model, path)
        back = load_ranker(path)
        assert math.isnan(back.sds[1])
        assert back.sds[0] == 2.0


class TestScoreFile:
    def test_load_and_lookup(self, tmp_path):
        path = tmp_path / "scores.tsv"
        path.write_text("a\tb\t0.8\nc\td\t0.25\n")
        table = load_scores(path)
        assert table.lookup("a", "b") == 0.8
        assert table.lookup("b", "a") == pytest.approx(0.2)
        assert table.lookup("x", "y") is None

    def test_invalid_rows_rejected(self, tmp_path):
        path = tmp_path / "scores.tsv"
        path.write_text("a\tb\t1.5\n")
        with pytest.raises(RankerError, match=":1"):
            load_scores(path)
        path.write_text("a\tb\n")
        with pytest.raises(RankerError, match="3 tab-separated"):
            load_scores(path)
        path.write_text("a\ta\t0.5\n")
        with pytest.raises(RankerError, match="self-pair"):
            load_scores(path)
        path.write_text("a\tb\t0.4\na\tb\t0.6\n")
        with pytest.raises(RankerError, match="duplicate"):
            load_scores(path)

    def test_round_trip(self, tmp_path):
        table = ScoreTable({("a", "b"): 0.875, ("c", "d"): 0.125})
        path = tmp_path / "scores.tsv"
        save_scores(table, path)
        back = load_scores(path)
        assert back.scores == table.scores

    def test_override_precedence(self):
        r = two_feature_ranker(1.0, 0.0)
        a = make_vector("a", f1=3.0, f2=0.0)
        b = make_vector("b", f1=0.0, f2=0.0)
        table = ScoreTable({("a", "b"): 0.123})
        assert scored_probability(r, table, "a", "b", a, b) == 0.123
        fallback = scored_probability(r, table, "a", "x", a, b)
        assert fallback == score_pair(r, a, b)

    def test_no_score_available(self):
        with pytest.raises(RankerError, match="no score"):
            scored_probability(None, ScoreTable(), "a", "b")
