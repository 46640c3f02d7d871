"""Feature-preference correlation fits and their reporting surfaces."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from stylefuse.corpus import JudgmentSet
from stylefuse.features.registry import FeatureMatrix
from stylefuse.bayes.model import BayesData, ModelConfig, make_posterior
from stylefuse.bayes.nuts import NutsConfig, nuts_sample
from stylefuse.bayes.diagnostics import ess_bulk, split_rhat


@dataclass
class FitConfig:
    warmup: int = 1000
    samples: int = 1000
    chains: int = 4
    seed: int = 0
    target_accept: float = 0.8
    max_depth: int = 10
    model: ModelConfig = field(default_factory=ModelConfig)

    def nuts(self) -> NutsConfig:
        return NutsConfig(
            warmup=self.warmup,
            samples=self.samples,
            target_accept=self.target_accept,
            max_depth=self.max_depth,
            seed=self.seed,
            chains=self.chains,
        )


@dataclass
class CorrelationResult:
    feature: str
    topics: list[str]
    topic_mean: np.ndarray
    topic_sd: np.ndarray
    topic_q5: np.ndarray
    topic_q95: np.ndarray
    topic_rhat: np.ndarray
    topic_ess: np.ndarray
    pooled_mean: float
    pooled_sd: float
    pooled_q5: float
    pooled_q95: float
    pooled_rhat: float
    pooled_ess: float
    divergences: int
    prob_shift: float
    odds_multiplier: float

    def topic_summary(self, topic: str) -> dict:
        i = self.topics.index(topic)
        return {
            "mean": float(self.topic_mean[i]),
            "sd": float(self.topic_sd[i]),
            "q5": float(self.topic_q5[i]),
            "q95": float(self.topic_q95[i]),
            "rhat": float(self.topic_rhat[i]),
            "ess": float(self.topic_ess[i]),
        }

    def interval_excludes_zero(self) -> bool:
        return (self.pooled_q5 > 0.0) or (self.pooled_q95 < 0.0)


class ProbabilityShift(NamedTuple):
    shift: float  # probability points, out of 100
    odds: float   # multiplicative odds factor


def logit_shift_to_probability(delta: float) -> ProbabilityShift:
    """Render a logit-scale shift as probability points and an odds multiplier."""
    if not np.isfinite(delta):
        raise ValueError("delta must be finite")
    return ProbabilityShift(
        shift=float((expit(delta) - 0.5) * 100.0),
        odds=float(np.exp(delta)),
    )


def _flip_slot(pair_id: str) -> bool:
    return bool(hashlib.blake2b(pair_id.encode(), digest_size=1).digest()[0] & 1)


def build_bayes_data(
    judgments: JudgmentSet, matrix: FeatureMatrix, feature: str
) -> tuple[BayesData, list[str], list[str], list[str]]:
    """Assemble model inputs for one feature; ties are dropped up front.

    Judgments store the winner first, so the A/B slot of each pair is
    re-randomized here (a deterministic hash of the pair id) and the
    outcome records which slot won. A constant outcome vector would let
    the intercept absorb every win and leave the slope uninformed.

    Returns (data, a_ids, b_ids, topics) with the index orderings used.
    """
    if not matrix.standardized:
        raise ValueError("feature matrix must be standardized")
    if feature not in matrix.names:
        raise ValueError(f"feature {feature!r} not in matrix")
    if feature in matrix.constant_columns:
        raise ValueError(f"feature {feature!r} is constant")
    usable = judgments.non_tied()
    if len(usable) == 0:
        raise ValueError("no non-tied judgments")

    col = matrix.column(feature)
    idx_of = {did: i for i, did in enumerate(matrix.doc_ids)}

    def value(did: str) -> float:
        if did not in idx_of:
            raise ValueError(f"document {did!r} missing from feature matrix")
        v = col[idx_of[did]]
        if np.isnan(v):
            raise ValueError(f"feature {feature!r} missing for document {did!r}")
        return float(v)

    slot_a, slot_b, outcomes = [], [], []
    for j in usable:
        if _flip_slot(j.pair_id):
            slot_a.append(j.b_id)
            slot_b.append(j.a_id)
            outcomes.append(0.0)
        else:
            slot_a.append(j.a_id)
            slot_b.append(j.b_id)
            outcomes.append(1.0)

    a_ids = sorted(set(slot_a))
    b_ids = sorted(set(slot_b))
    topics = sorted({j.topic for j in usable})
    a_of = {d: i for i, d in enumerate(a_ids)}
    b_of = {d: i for i, d in enumerate(b_ids)}
    t_of = {t: i for i, t in enumerate(topics)}

    diffs = np.array([value(a) - value(b) for a, b in zip(slot_a, slot_b)])
    if float(diffs.std()) == 0.0:
        raise ValueError(f"feature {feature!r} is constant across judgment pairs")
    counts = np.bincount([t_of[j.topic] for j in usable], minlength=len(topics))
    if np.all(counts < 2):
        raise ValueError("fewer than 2 observations in every topic")

    data = BayesData(
        outcomes=np.array(outcomes),
        a_index=np.array([a_of[d] for d in slot_a]),
        b_index=np.array([b_of[d] for d in slot_b]),
        topic_index=np.array([t_of[j.topic] for j in usable]),
        feat_diff=diffs,
        n_a=len(a_ids),
        n_b=len(b_ids),
        n_topics=len(topics),
    )
    return data, a_ids, b_ids, topics


def fit_correlation_data(
    data: BayesData,
    config: FitConfig | None = None,
    feature: str = "feature",
    topics: list[str] | None = None,
) -> CorrelationResult:
    """Sample the model on prepared inputs and summarize the slope block."""
    config = config or FitConfig()
    if topics is None:
        topics = [f"t{k}" for k in range(data.n_topics)]
    post = make_posterior(data, config.model)
    result = nuts_sample(
        post.logp, post.grad, post.dim, config.nuts(), logp_and_grad=post.logp_and_grad
    )

    draws = result.draws  # (chains, samples, dim)
    n_a, n_b, n_t = data.n_a, data.n_b, data.n_topics
    g_bar = draws[:, :, 5 + n_a + n_b]
    g_raw = draws[:, :, 6 + n_a + n_b]
    g_v = draws[:, :, 7 + n_a + n_b : 7 + n_a + n_b + n_t]
    gammas = g_bar[:, :, None] + g_v * np.exp(g_raw)[:, :, None]  # (chains, samples, topics)

    flat_g = gammas.reshape(-1, n_t)
    flat_bar = g_bar.reshape(-1)
    pooled_mean = float(flat_bar.mean())
    shift = logit_shift_to_probability(pooled_mean)
    return CorrelationResult(
        feature=feature,
        topics=list(topics),
        topic_mean=flat_g.mean(axis=0),
        topic_sd=flat_g.std(axis=0, ddof=1),
        topic_q5=np.quantile(flat_g, 0.05, axis=0),
        topic_q95=np.quantile(flat_g, 0.95, axis=0),
        topic_rhat=np.array([split_rhat(gammas[:, :, t]) for t in range(n_t)]),
        topic_ess=np.array([ess_bulk(gammas[:, :, t]) for t in range(n_t)]),
        pooled_mean=pooled_mean,
        pooled_sd=float(flat_bar.std(ddof=1)),
        pooled_q5=float(np.quantile(flat_bar, 0.05)),
        pooled_q95=float(np.quantile(flat_bar, 0.95)),
        pooled_rhat=split_rhat(g_bar),
        pooled_ess=ess_bulk(g_bar),
        divergences=int(result.divergences.sum()),
        prob_shift=shift.shift,
        odds_multiplier=shift.odds,
    )


def fit_feature_correlation(
    judgments: JudgmentSet,
    matrix: FeatureMatrix,
    feature: str,
    config: FitConfig | None = None,
) -> CorrelationResult:
    """Posterior over per-topic and pooled slopes for one feature."""
    config = config or FitConfig()
    data, _, _, topics = build_bayes_data(judgments, matrix, feature)
    return fit_correlation_data(data, config, feature=feature, topics=topics)


def results_to_csv(results: list[CorrelationResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "topic", "mean", "sd", "q5", "q95", "rhat", "ess"])
        for res in results:
            writer.writerow([
                res.feature, "pooled",
                repr(res.pooled_mean), repr(res.pooled_sd),
                repr(res.pooled_q5), repr(res.pooled_q95),
                repr(res.pooled_rhat), repr(res.pooled_ess),
            ])
            for i, topic in enumerate(res.topics):
                writer.writerow([
                    res.feature, topic,
                    repr(float(res.topic_mean[i])), repr(float(res.topic_sd[i])),
                    repr(float(res.topic_q5[i])), repr(float(res.topic_q95[i])),
                    repr(float(res.topic_rhat[i])), repr(float(res.topic_ess[i])),
                ])


def results_from_csv(path) -> list[CorrelationResult]:
    """Rebuild results from the CSV layout written by results_to_csv.

    Sampler-run counters are not serialized: loaded results carry a zero
    divergence count, and the probability-shift columns are recomputed from
    the pooled mean.
    """
    rows_by_feature: dict[str, dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = ["feature", "topic", "mean", "sd", "q5", "q95", "rhat", "ess"]
        if reader.fieldnames != expected:
            raise ValueError(f"{path}: expected columns {expected}, found {reader.fieldnames}")
        for row in reader:
            entry = rows_by_feature.setdefault(row["feature"], {"pooled": None, "topics": []})
            if row["topic"] == "pooled":
                entry["pooled"] = row
            else:
                entry["topics"].append(row)
    results = []
    for feature, entry in rows_by_feature.items():
        if entry["pooled"] is None:
            raise ValueError(f"{path}: feature {feature!r} has no pooled row")
        pooled, topics = entry["pooled"], entry["topics"]
        pooled_mean = float(pooled["mean"])
        shift = logit_shift_to_probability(pooled_mean)
        results.append(
            CorrelationResult(
                feature=feature,
                topics=[r["topic"] for r in topics],
                topic_mean=np.array([float(r["mean"]) for r in topics]),
                topic_sd=np.array([float(r["sd"]) for r in topics]),
                topic_q5=np.array([float(r["q5"]) for r in topics]),
                topic_q95=np.array([float(r["q95"]) for r in topics]),
                topic_rhat=np.array([float(r["rhat"]) for r in topics]),
                topic_ess=np.array([float(r["ess"]) for r in topics]),
                pooled_mean=pooled_mean,
                pooled_sd=float(pooled["sd"]),
                pooled_q5=float(pooled["q5"]),
                pooled_q95=float(pooled["q95"]),
                pooled_rhat=float(pooled["rhat"]),
                pooled_ess=float(pooled["ess"]),
                divergences=0,
                prob_shift=shift.shift,
                odds_multiplier=shift.odds,
            )
        )
    return results


def forest_plot(results: list[CorrelationResult], path) -> None:
    """Interval plot of pooled slopes, logit scale below, win-shift scale above."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "stylefuse"

    ordered = sorted(results, key=lambda r: r.pooled_mean)
    names = [r.feature for r in ordered]
    means = np.array([r.pooled_mean for r in ordered])
    lo = np.array([r.pooled_q5 for r in ordered])
    hi = np.array([r.pooled_q95 for r in ordered])

    height = max(2.5, 0.32 * len(ordered) + 1.2)
    fig, ax = plt.subplots(figsize=(7.0, height))
    y = np.arange(len(ordered))
    ax.hlines(y, lo, hi, color="#3465a4", lw=2)
    ax.plot(means, y, "o", color="#204a87", ms=5)
    ax.axvline(0.0, color="0.4", lw=1, ls=":")
    ax.set_yticks(y)
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xlabel("preference shift (logit scale)")
    ax.set_ylim(-0.8, len(ordered) - 0.2)

    def _to_points(x):
        return (expit(x) - 0.5) * 100.0

    def _from_points(p):
        # Axis autoscale probes the endpoints; keep them off the poles.
        q = np.clip(p / 100.0 + 0.5, 1e-9, 1.0 - 1e-9)
        return np.log(q / (1.0 - q))

    top = ax.secondary_xaxis("top", functions=(_to_points, _from_points))
    top.set_xlabel("win-probability shift (points)")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
