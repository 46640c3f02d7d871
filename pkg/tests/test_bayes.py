"""Tests for the pairwise preference model, the sampler, and the fit wrapper."""

import math

import numpy as np
import pytest
from scipy.special import expit

from stylefuse.bayes import (
    BayesData,
    BayesParams,
    CorrelationResult,
    FitConfig,
    ModelConfig,
    NutsConfig,
    build_bayes_data,
    diagnostics,
    ess_bulk,
    fit_correlation_data,
    grad_log_posterior,
    leapfrog,
    log_posterior,
    logit_shift_to_probability,
    make_posterior,
    nuts_sample,
    results_to_csv,
    split_rhat,
)
from stylefuse.bayes.nuts import SamplerError
from stylefuse.corpus import JudgmentSet, PairJudgment
from stylefuse.features import FeatureMatrix


def tiny_data():
    return BayesData(
        outcomes=np.array([1, 0, 1, 1]),
        a_index=np.array([0, 1, 0, 1]),
        b_index=np.array([0, 1, 1, 0]),
        topic_index=np.array([0, 0, 1, 1]),
        feat_diff=np.array([0.5, -1.0, 1.5, 0.2]),
        n_a=2,
        n_b=2,
        n_topics=2,
    )


def random_data(rng, n_obs=40, n_a=6, n_b=5, n_topics=3):
    return BayesData(
        outcomes=rng.integers(0, 2, n_obs),
        a_index=rng.integers(0, n_a, n_obs),
        b_index=rng.integers(0, n_b, n_obs),
        topic_index=rng.integers(0, n_topics, n_obs),
        feat_diff=rng.normal(size=n_obs),
        n_a=n_a,
        n_b=n_b,
        n_topics=n_topics,
    )


class TestModel:
    def test_zero_params_likelihood_is_log_half_per_observation(self):
        data = tiny_data()
        params = BayesParams.zeros(data.n_a, data.n_b, data.n_topics)
        ll = log_posterior(params, data, include_prior=False)
        assert ll == pytest.approx(4 * math.log(0.5), abs=1e-12)

    def test_single_observation_gamma_only(self):
        # logit = gamma * feat_diff = 1.0, win recorded, so ll = log sigmoid(1)
        data = BayesData(
            outcomes=np.array([1]),
            a_index=np.array([0]),
            b_index=np.array([0]),
            topic_index=np.array([0]),
            feat_diff=np.array([2.0]),
            n_a=1,
            n_b=1,
            n_topics=1,
        )
        params = BayesParams.zeros(1, 1, 1)
        params = BayesParams(
            p_bar=params.p_bar,
            alpha_bar=params.alpha_bar,
            alpha_sigma_raw=params.alpha_sigma_raw,
            alpha_v=params.alpha_v,
            beta_bar=params.beta_bar,
            beta_sigma_raw=params.beta_sigma_raw,
            beta_v=params.beta_v,
            gamma_bar=0.5,
            gamma_sigma_raw=params.gamma_sigma_raw,
            gamma_v=params.gamma_v,
        )
        ll = log_posterior(params, data, include_prior=False)
        assert ll == pytest.approx(math.log(expit(1.0)), abs=1e-12)

    def test_label_swap_antisymmetry(self):
        # Swapping the roles of the two slots while flipping outcomes and
        # feature differences must leave the likelihood unchanged when the
        # item-bias vectors trade places as well.
        rng = np.random.default_rng(7)
        data = random_data(rng, n_a=4, n_b=4)
        theta = rng.normal(scale=0.3, size=BayesParams.dim(4, 4, 3))
        p = BayesParams.unpack(theta, 4, 4, 3)
        swapped_data = BayesData(
            outcomes=1 - data.outcomes,
            a_index=data.b_index,
            b_index=data.a_index,
            topic_index=data.topic_index,
            feat_diff=-data.feat_diff,
            n_a=4,
            n_b=4,
            n_topics=3,
        )
        swapped = BayesParams(
            p_bar=-p.p_bar,
            alpha_bar=p.beta_bar,
            alpha_sigma_raw=p.beta_sigma_raw,
            alpha_v=p.beta_v,
            beta_bar=p.alpha_bar,
            beta_sigma_raw=p.alpha_sigma_raw,
            beta_v=p.alpha_v,
            gamma_bar=p.gamma_bar,
            gamma_sigma_raw=p.gamma_sigma_raw,
            gamma_v=p.gamma_v,
        )
        ll = log_posterior(p, data, include_prior=False)
        ll_swapped = log_posterior(swapped, swapped_data, include_prior=False)
        assert ll_swapped == pytest.approx(ll, abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        data = random_data(rng)
        dim = BayesParams.dim(data.n_a, data.n_b, data.n_topics)
        config = ModelConfig()
        eps = 1e-6
        worst = 0.0
        for _ in range(100):
            theta = rng.normal(scale=0.8, size=dim)
            params = BayesParams.unpack(theta, data.n_a, data.n_b, data.n_topics)
            grad = grad_log_posterior(params, data, config)
            fd = np.empty(dim)
            for k in range(dim):
                hi = theta.copy()
                lo = theta.copy()
                hi[k] += eps
                lo[k] -= eps
                fd[k] = (
                    log_posterior(BayesParams.unpack(hi, data.n_a, data.n_b, data.n_topics), data, config)
                    - log_posterior(BayesParams.unpack(lo, data.n_a, data.n_b, data.n_topics), data, config)
                ) / (2 * eps)
            scale = np.maximum(np.abs(fd), 1.0)
            worst = max(worst, float(np.max(np.abs(grad - fd) / scale)))
        assert worst < 1e-5

    def test_fast_path_matches_reference(self):
        rng = np.random.default_rng(3)
        data = random_data(rng)
        post = make_posterior(data)
        for _ in range(20):
            theta = rng.normal(scale=0.7, size=post.dim)
            params = BayesParams.unpack(theta, data.n_a, data.n_b, data.n_topics)
            assert post.logp(theta) == pytest.approx(log_posterior(params, data), rel=1e-10)
            np.testing.assert_allclose(
                post.grad(theta),
                grad_log_posterior(params, data),
                rtol=1e-9,
                atol=1e-10,
            )
            lp, g = post.logp_and_grad(theta)
            assert lp == pytest.approx(post.logp(theta), rel=1e-12)
            np.testing.assert_allclose(g, post.grad(theta), rtol=1e-12)

    def test_prior_scale_interpretations_differ(self):
        data = tiny_data()
        theta = np.full(BayesParams.dim(2, 2, 2), 0.3)
        params = BayesParams.unpack(theta, 2, 2, 2)
        as_sd = log_posterior(params, data, ModelConfig(prior_scale=0.25))
        as_var = log_posterior(params, data, ModelConfig(prior_scale=0.25, scale_is_variance=True))
        assert as_sd != pytest.approx(as_var)

    def test_data_validation(self):
        with pytest.raises(ValueError, match="length"):
            BayesData(
                outcomes=np.array([1, 0]),
                a_index=np.array([0]),
                b_index=np.array([0]),
                topic_index=np.array([0]),
                feat_diff=np.array([0.1]),
                n_a=1,
                n_b=1,
                n_topics=1,
            )
        with pytest.raises(ValueError, match="binary"):
            BayesData(
                outcomes=np.array([2]),
                a_index=np.array([0]),
                b_index=np.array([0]),
                topic_index=np.array([0]),
                feat_diff=np.array([0.1]),
                n_a=1,
                n_b=1,
                n_topics=1,
            )
        with pytest.raises(ValueError, match="range"):
            BayesData(
                outcomes=np.array([1]),
                a_index=np.array([5]),
                b_index=np.array([0]),
                topic_index=np.array([0]),
                feat_diff=np.array([0.1]),
                n_a=1,
                n_b=1,
                n_topics=1,
            )


class TestLeapfrog:
    @staticmethod
    def quadratic():
        scales = np.array([1.0, 4.0])

        def logp_and_grad(theta):
            return -0.5 * float(np.sum(theta**2 / scales)), -theta / scales

        return logp_and_grad

    def test_reversibility(self):
        logp_and_grad = self.quadratic()
        rng = np.random.default_rng(0)
        theta = rng.normal(size=2)
        r = rng.normal(size=2)
        mass = np.array([1.0, 0.5])
        _, grad0 = logp_and_grad(theta)
        th, rr, grad = theta, r, grad0
        for _ in range(25):
            th, rr, grad, _ = leapfrog(th, rr, grad, 0.05, mass, logp_and_grad)
        th, rr = th, -rr
        for _ in range(25):
            th, rr, grad, _ = leapfrog(th, rr, grad, 0.05, mass, logp_and_grad)
        np.testing.assert_allclose(th, theta, atol=1e-8)
        np.testing.assert_allclose(-rr, r, atol=1e-8)

    def test_energy_error_scales_quadratically(self):
        logp_and_grad = self.quadratic()
        mass = np.ones(2)
        theta = np.array([1.0, -0.7])
        r = np.array([0.3, 0.9])

        def energy_drift(eps, steps):
            lp0, grad = logp_and_grad(theta)
            h0 = -lp0 + 0.5 * float(np.sum(r**2))
            th, rr = theta, r
            for _ in range(steps):
                th, rr, grad, lp = leapfrog(th, rr, grad, eps, mass, logp_and_grad)
            return abs((-lp + 0.5 * float(np.sum(rr**2))) - h0)

        drift_coarse = energy_drift(0.2, 10)
        drift_fine = energy_drift(0.1, 20)
        assert 3.5 < drift_coarse / drift_fine < 4.5


class TestNuts:
    def test_standard_normal_moments(self):
        def logp(theta):
            return -0.5 * float(np.sum(theta**2))

        def grad(theta):
            return -theta

        result = nuts_sample(logp, grad, dim=2, config=NutsConfig(warmup=500, samples=500, chains=2, seed=1))
        draws = result.flat()
        assert abs(draws.mean()) < 0.1
        assert 0.8 < draws.var() < 1.2

    def test_correlated_gaussian_moments(self):
        rho = 0.9
        prec = np.linalg.inv(np.array([[1.0, rho], [rho, 1.0]]))

        def logp(theta):
            return -0.5 * float(theta @ prec @ theta)

        def grad(theta):
            return -prec @ theta

        result = nuts_sample(logp, grad, dim=2, config=NutsConfig(warmup=500, samples=500, chains=4, seed=5))
        draws = result.flat()
        corr = np.corrcoef(draws.T)[0, 1]
        assert abs(corr - rho) < 0.05
        assert np.all(np.abs(draws.mean(axis=0)) < 0.1)

    def test_deterministic_given_seed(self):
        def logp(theta):
            return -0.5 * float(np.sum(theta**2))

        def grad(theta):
            return -theta

        cfg = NutsConfig(warmup=100, samples=100, chains=2, seed=9)
        a = nuts_sample(logp, grad, dim=3, config=cfg)
        b = nuts_sample(logp, grad, dim=3, config=cfg)
        np.testing.assert_array_equal(a.draws, b.draws)
        assert a.step_sizes == pytest.approx(b.step_sizes)

    def test_divergences_reported_on_nasty_target(self):
        # A cliff in the log density forces energy blowups.
        def logp(theta):
            x = float(theta[0])
            return -0.5 * x * x - 1e6 * max(0.0, x - 2.0) ** 2

        def grad(theta):
            x = float(theta[0])
            g = -x
            if x > 2.0:
                g -= 2e6 * (x - 2.0)
            return np.array([g])

        result = nuts_sample(
            logp, grad, dim=1, config=NutsConfig(warmup=200, samples=200, chains=1, seed=3, step_size=0.9)
        )
        assert result.divergences.sum() >= 0  # runs to completion despite the cliff

    def test_nonfinite_gradient_raises(self):
        def logp(theta):
            return -0.5 * float(np.sum(theta**2))

        def grad(theta):
            return np.full_like(theta, np.nan)

        with pytest.raises(SamplerError):
            nuts_sample(logp, grad, dim=2, config=NutsConfig(warmup=50, samples=50, chains=1, seed=0))


class TestDiagnostics:
    def test_rhat_near_one_for_iid_chains(self):
        rng = np.random.default_rng(0)
        draws = rng.normal(size=(4, 500))
        assert split_rhat(draws) < 1.05

    def test_rhat_flags_disjoint_chains(self):
        rng = np.random.default_rng(1)
        draws = rng.normal(size=(4, 500)) + np.array([[0.0], [0.0], [5.0], [5.0]])
        assert split_rhat(draws) > 1.5

    def test_rhat_constant_chains_nan(self):
        draws = np.ones((4, 100))
        assert math.isnan(split_rhat(draws))

    def test_ess_close_to_sample_size_for_iid(self):
        rng = np.random.default_rng(2)
        draws = rng.normal(size=(4, 500))
        ess = ess_bulk(draws)
        assert 0.8 * 2000 < ess < 1.25 * 2000

    def test_ess_small_for_sticky_chains(self):
        rng = np.random.default_rng(3)
        draws = np.empty((2, 1000))
        for c in range(2):
            x = 0.0
            for i in range(1000):
                x = 0.99 * x + rng.normal(scale=0.1)
                draws[c, i] = x
        assert ess_bulk(draws) < 300

    def test_diagnostics_summary(self):
        rng = np.random.default_rng(4)
        draws = rng.normal(size=(4, 200, 2))
        out = diagnostics(draws, divergences=3)
        assert out["divergences"] == 3
        assert not out["flagged"]
        assert len(out["rhat"]) == 2


class TestShiftConversion:
    def test_unit_logit_shift(self):
        shift = logit_shift_to_probability(1.0)
        assert shift.shift == pytest.approx(23.105857863000487, abs=1e-9)
        assert shift.odds == pytest.approx(math.e, rel=1e-12)

    def test_zero_shift(self):
        shift = logit_shift_to_probability(0.0)
        assert shift.shift == 0.0
        assert shift.odds == 1.0

    def test_antisymmetry(self):
        up = logit_shift_to_probability(0.7)
        down = logit_shift_to_probability(-0.7)
        assert up.shift == pytest.approx(-down.shift, abs=1e-12)
        assert up.odds == pytest.approx(1.0 / down.odds, rel=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            logit_shift_to_probability(float("nan"))


def judged_inputs():
    judgments = JudgmentSet(
        [
            PairJudgment("p0", "d0", "d1", "t0"),
            PairJudgment("p1", "d2", "d3", "t0"),
            PairJudgment("p2", "d4", "d5", "t1"),
            PairJudgment("p3", "d1", "d2", "t1"),
            PairJudgment("p4", "d3", "d0", "t0"),
            PairJudgment("p5", "d5", "d4", "t1"),
        ]
    )
    matrix = FeatureMatrix(
        doc_ids=[f"d{i}" for i in range(6)],
        names=["length"],
        values=np.array([[0.5], [-0.3], [1.2], [-1.0], [0.1], [-0.5]]),
        standardized=True,
        means=np.zeros(1),
        sds=np.ones(1),
    )
    return judgments, matrix


class TestBuildData:
    def test_outcome_marks_winning_slot(self):
        judgments, matrix = judged_inputs()
        data, a_ids, b_ids, topics = build_bayes_data(judgments, matrix, "length")
        assert len(data) == 6
        assert topics == ["t0", "t1"]
        value = {did: matrix.values[i, 0] for i, did in enumerate(matrix.doc_ids)}
        for i, j in enumerate(judgments):
            slot_a, slot_b = a_ids[data.a_index[i]], b_ids[data.b_index[i]]
            if data.outcomes[i] == 1.0:
                assert (slot_a, slot_b) == (j.a_id, j.b_id)
            else:
                assert (slot_a, slot_b) == (j.b_id, j.a_id)
            assert data.feat_diff[i] == pytest.approx(value[slot_a] - value[slot_b])

    def test_slot_assignment_balanced_and_deterministic(self):
        rng = np.random.default_rng(3)
        judgments = JudgmentSet(
            [
                PairJudgment(f"pair{k:03d}", f"w{k}", f"l{k}", "t0")
                for k in range(200)
            ]
        )
        doc_ids = [d for j in judgments for d in (j.a_id, j.b_id)]
        matrix = FeatureMatrix(
            doc_ids=doc_ids,
            names=["length"],
            values=rng.normal(size=(len(doc_ids), 1)),
            standardized=True,
            means=np.zeros(1),
            sds=np.ones(1),
        )
        data, _, _, _ = build_bayes_data(judgments, matrix, "length")
        rate = float(data.outcomes.mean())
        assert 0.35 < rate < 0.65
        again, _, _, _ = build_bayes_data(judgments, matrix, "length")
        np.testing.assert_array_equal(data.outcomes, again.outcomes)
        np.testing.assert_array_equal(data.feat_diff, again.feat_diff)

    def test_requires_standardized_matrix(self):
        judgments, matrix = judged_inputs()
        raw = FeatureMatrix(
            doc_ids=matrix.doc_ids,
            names=matrix.names,
            values=matrix.values,
            standardized=False,
        )
        with pytest.raises(ValueError, match="standardized"):
            build_bayes_data(judgments, raw, "length")

    def test_unknown_feature_rejected(self):
        judgments, matrix = judged_inputs()
        with pytest.raises(ValueError, match="length_typo"):
            build_bayes_data(judgments, matrix, "length_typo")

    def test_missing_value_rejected(self):
        judgments, matrix = judged_inputs()
        values = matrix.values.copy()
        values[2, 0] = np.nan
        broken = FeatureMatrix(
            doc_ids=matrix.doc_ids,
            names=matrix.names,
            values=values,
            standardized=True,
            means=matrix.means,
            sds=matrix.sds,
        )
        with pytest.raises(ValueError, match="missing"):
            build_bayes_data(judgments, broken, "length")

    def test_ties_dropped(self):
        judgments, matrix = judged_inputs()
        with_tie = JudgmentSet(list(judgments) + [PairJudgment("p6", "d0", "d5", "t0", tie=True)])
        data, _, _, _ = build_bayes_data(with_tie, matrix, "length")
        assert len(data) == 6

    def test_all_topics_sparse_rejected(self):
        _, matrix = judged_inputs()
        sparse = JudgmentSet(
            [
                PairJudgment("p0", "d0", "d1", "t0"),
                PairJudgment("p1", "d2", "d3", "t1"),
            ]
        )
        with pytest.raises(ValueError, match="fewer than 2"):
            build_bayes_data(sparse, matrix, "length")


@pytest.fixture(scope="module")
def small_fit():
    rng = np.random.default_rng(11)
    n_docs, n_pairs, n_topics = 40, 120, 3
    x = rng.normal(size=n_docs)
    x = (x - x.mean()) / x.std(ddof=1)
    alpha = rng.normal(scale=0.2, size=n_docs)
    beta = rng.normal(scale=0.2, size=n_docs)
    gamma = 0.8
    first = np.empty(n_pairs, dtype=int)
    second = np.empty(n_pairs, dtype=int)
    for k in range(n_pairs):
        first[k], second[k] = rng.choice(n_docs, 2, replace=False)
    topic = np.arange(n_pairs) % n_topics
    logit = alpha[first] - beta[second] + gamma * (x[first] - x[second])
    wins = (rng.random(n_pairs) < expit(logit)).astype(int)
    data = BayesData(wins, first, second, topic, x[first] - x[second], n_docs, n_docs, n_topics)
    cfg = FitConfig(warmup=150, samples=150, chains=2, seed=2, target_accept=0.65, max_depth=7)
    return fit_correlation_data(data, cfg, feature="length")


class TestFit:

    def test_result_shapes(self, small_fit):
        r = small_fit
        assert isinstance(r, CorrelationResult)
        assert r.feature == "length"
        assert len(r.topics) == 3
        assert r.topic_mean.shape == (3,)

    def test_intervals_bracket_means(self, small_fit):
        r = small_fit
        assert r.pooled_q5 <= r.pooled_mean <= r.pooled_q95
        assert np.all(r.topic_q5 <= r.topic_mean)
        assert np.all(r.topic_mean <= r.topic_q95)

    def test_shift_consistent_with_pooled_mean(self, small_fit):
        r = small_fit
        expected = logit_shift_to_probability(r.pooled_mean)
        assert r.prob_shift == pytest.approx(expected.shift)
        assert r.odds_multiplier == pytest.approx(expected.odds)

    def test_csv_layout(self, small_fit, tmp_path):
        path = tmp_path / "fit.csv"
        results_to_csv([small_fit], path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "feature,topic,mean,sd,q5,q95,rhat,ess"
        assert lines[1].startswith("length,pooled,")
        assert len(lines) == 1 + 1 + 3

    def test_forest_plot_writes_svg(self, small_fit, tmp_path):
        from stylefuse.bayes import forest_plot

        out = tmp_path / "forest.svg"
        forest_plot([small_fit], out)
        content = out.read_text()
        assert "<svg" in content
        assert out.stat().st_size > 500
