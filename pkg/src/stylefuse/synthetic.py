"""Deterministic synthetic fixtures.

Three generators share one convention: everything is reproducible from the
seed alone, and the planted effects are strong enough to be recovered by the
estimators they exercise.

- `synthetic_corpus` plants a style that prefers short texts: pairwise
  winners are drawn from a logistic model whose score falls with word count.
- `preference_data` draws judgment outcomes from the fitted model's own
  generative story (per-document biases, per-topic slopes around a shared
  mean) for slope-recovery checks.
- `infusion_pairs` yields short styled / long unstyled exemplar pairs over a
  small closed vocabulary for generator training runs.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from stylefuse.bayes.model import BayesData
from stylefuse.corpus import Corpus, Document, EmbeddingSequence, JudgmentSet, PairJudgment
from stylefuse.infuse import EOS, TrainingPair

TOPICS = ("economy", "health", "energy", "media")

_WORDS = (
    "we", "should", "act", "now", "the", "plan", "works", "people", "need",
    "clear", "proof", "costs", "fall", "when", "rules", "are", "fair", "this",
    "helps", "towns", "grow", "jobs", "stay", "local", "data", "shows", "it",
    "safe", "steps", "lead", "to", "better", "lives", "and", "still", "more",
)


def _compose_text(rng: np.random.Generator, n_words: int) -> str:
    words = [str(w) for w in rng.choice(_WORDS, size=n_words)]
    sentences = []
    i = 0
    while i < len(words):
        span = int(rng.integers(5, 9))
        chunk = words[i : i + span]
        sentences.append(" ".join(chunk).capitalize() + ".")
        i += span
    return " ".join(sentences)


def synthetic_corpus(
    n_docs: int = 120,
    n_pairs: int = 200,
    seed: int = 0,
    n_topics: int = 4,
    embedding_dim: int = 8,
    style_weight: float = -0.15,
    tie_rate: float = 0.02,
) -> Corpus:
    """Small preference corpus whose style favors short documents."""
    if not (1 <= n_topics <= len(TOPICS)):
        raise ValueError(f"n_topics must lie in [1, {len(TOPICS)}]")
    rng = np.random.default_rng([seed, 1])
    corpus = Corpus()
    word_counts: dict[str, int] = {}
    by_topic: dict[str, list[str]] = {t: [] for t in TOPICS[:n_topics]}
    for k in range(n_docs):
        topic = TOPICS[k % n_topics]
        n_words = int(rng.integers(4, 41))
        doc = Document(id=f"doc{k:03d}", text=_compose_text(rng, n_words), topic=topic)
        corpus.documents[doc.id] = doc
        word_counts[doc.id] = n_words
        by_topic[topic].append(doc.id)

    emb_rng = np.random.default_rng([seed, 2])
    for doc in corpus.documents.values():
        n_sent = max(len(doc.token_sentences()), 1)
        start = emb_rng.normal(size=embedding_dim)
        steps = emb_rng.normal(scale=0.3, size=(n_sent - 1, embedding_dim))
        vectors = np.vstack([start[None, :], start[None, :] + np.cumsum(steps, axis=0)]) if n_sent > 1 else start[None, :]
        corpus.embeddings[doc.id] = EmbeddingSequence(doc.id, vectors, unit="sentence")

    pair_rng = np.random.default_rng([seed, 3])
    judgments = []
    for p in range(n_pairs):
        topic = TOPICS[p % n_topics]
        i, j = pair_rng.choice(len(by_topic[topic]), size=2, replace=False)
        first, second = by_topic[topic][int(i)], by_topic[topic][int(j)]
        if pair_rng.uniform() < tie_rate:
            judgments.append(PairJudgment(f"pair{p:03d}", first, second, topic, tie=True))
            continue
        gap = style_weight * (word_counts[first] - word_counts[second])
        first_wins = pair_rng.uniform() < expit(gap)
        winner, loser = (first, second) if first_wins else (second, first)
        judgments.append(PairJudgment(f"pair{p:03d}", winner, loser, topic))
    corpus.judgments = JudgmentSet(judgments)
    corpus.validate()
    return corpus


def preference_data(
    gamma_bar: float,
    n_docs: int = 100,
    seed: int = 0,
    s_ab: float = 0.25,
    n_pairs: int = 500,
    n_topics: int = 4,
    s_g: float = 0.1,
) -> BayesData:
    """Judgment outcomes drawn from the preference model's generative story.

    One standardized feature per document; per-document win/loss biases with
    scale `s_ab`; per-topic slopes normal around `gamma_bar` with scale `s_g`.
    Slot A of each pair is a uniformly random document, not the winner, so
    the outcome column carries the signal.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n_docs)
    x = (x - x.mean()) / x.std()
    alpha = rng.normal(scale=s_ab, size=n_docs)
    beta = rng.normal(scale=s_ab, size=n_docs)
    slopes = gamma_bar + rng.normal(scale=s_g, size=n_topics)
    a_idx = np.empty(n_pairs, dtype=int)
    b_idx = np.empty(n_pairs, dtype=int)
    for k in range(n_pairs):
        i, j = rng.choice(n_docs, size=2, replace=False)
        a_idx[k], b_idx[k] = i, j
    t_idx = np.arange(n_pairs) % n_topics
    diff = x[a_idx] - x[b_idx]
    logit = alpha[a_idx] - beta[b_idx] + slopes[t_idx] * diff
    outcomes = (rng.uniform(size=n_pairs) < expit(logit)).astype(float)
    return BayesData(outcomes, a_idx, b_idx, t_idx, diff, n_docs, n_docs, n_topics)


INFUSION_TOKENS = ("argue", "build", "care", "doubt", "end", "find", "gain", "hold")


def infusion_pairs(
    n_pairs: int = 8,
    seed: int = 0,
    styled_words: tuple[int, int] = (2, 4),
    plain_words: tuple[int, int] = (8, 13),
) -> tuple[list[str], list[TrainingPair]]:
    """Closed vocabulary plus styled-short / plain-long training pairs."""
    rng = np.random.default_rng([seed, 4])
    pairs = []
    for _ in range(n_pairs):
        n_s = int(rng.integers(styled_words[0], styled_words[1] + 1))
        n_p = int(rng.integers(plain_words[0], plain_words[1] + 1))
        styled = [str(w) for w in rng.choice(INFUSION_TOKENS, size=n_s)] + [EOS]
        plain = [str(w) for w in rng.choice(INFUSION_TOKENS, size=n_p)] + [EOS]
        pairs.append(TrainingPair(prompt=[], y_s_star=styled, y_ns_star=plain))
    return list(INFUSION_TOKENS), pairs
