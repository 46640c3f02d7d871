"""Tests for judgment-set expansion from an external corpus."""

import numpy as np
import pytest

from stylefuse.augment import (
    AugmentConfig,
    AugmentError,
    augment_pairs,
    augment_report,
    merge_augmented,
    save_augmented,
    topk_similar,
)
from stylefuse.corpus import Corpus, Document, EmbeddingSequence, load_judgments


class TestTopK:
    def test_exact_match_ranked_first(self):
        pool = {"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0]), "c": np.array([1.0, 1.0])}
        out = topk_similar(np.array([0.0, 1.0]), pool, 2)
        assert out[0] == "b"

    def test_orthogonal_query_id_order(self):
        pool = {"z": np.array([1.0, 0.0]), "a": np.array([-1.0, 0.0]), "m": np.array([2.0, 0.0])}
        out = topk_similar(np.array([0.0, 1.0]), pool, 3)
        assert out == ["a", "m", "z"]

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(0)
        pool = {f"d{i:03d}": rng.normal(size=8) for i in range(100)}
        query = rng.normal(size=8)

        def cos(v):
            return float(np.dot(v, query) / (np.linalg.norm(v) * np.linalg.norm(query)))

        oracle = sorted(pool, key=lambda i: (-cos(pool[i]), i))[:5]
        assert topk_similar(query, pool, 5) == oracle

    def test_oversized_k_warns(self):
        pool = {"a": np.array([1.0]), "b": np.array([2.0])}
        with pytest.warns(RuntimeWarning, match="exceeds"):
            out = topk_similar(np.array([1.0]), pool, 10)
        assert len(out) == 2

    def test_dimension_mismatch(self):
        pool = {"a": np.array([1.0, 0.0])}
        with pytest.raises(AugmentError, match="dimension"):
            topk_similar(np.array([1.0]), pool, 1)

    def test_empty_pool(self):
        with pytest.raises(AugmentError, match="empty"):
            topk_similar(np.array([1.0]), {}, 1)


def style_corpus():
    docs = {}
    embeds = {}
    vecs = {"s0": [1.0, 0.0], "s1": [0.9, 0.1], "s2": [0.0, 1.0]}
    topics = {"s0": "guns", "s1": "guns", "s2": "school"}
    for did, v in vecs.items():
        docs[did] = Document(id=did, text=f"styled {did}", topic=topics[did])
        embeds[did] = EmbeddingSequence(doc_id=did, vectors=np.array([v]))
    return Corpus(documents=docs, embeddings=embeds)


def external_corpus(ids=("x0", "x1")):
    docs = {}
    embeds = {}
    vecs = {"x0": [1.0, 0.05], "x1": [0.1, 1.0]}
    for did in ids:
        docs[did] = Document(id=did, text=f"external {did}", topic="", source="external_corpus")
        embeds[did] = EmbeddingSequence(doc_id=did, vectors=np.array([vecs[did]]))
    return Corpus(documents=docs, embeddings=embeds)


def fixed_scorer(scores):
    def score(a, b):
        return scores[(a, b)]

    return score


class TestAugmentPairs:
    def test_single_win_included(self):
        style = style_corpus()
        external = external_corpus(ids=("x0",))
        scores = {("x0", "s0"): 0.6, ("x0", "s1"): 0.4}
        result = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=2))
        assert len(result.judgments) == 1
        j = result.judgments[0]
        assert (j.a_id, j.b_id, j.topic) == ("x0", "s0", "guns")

    def test_no_wins_contributes_nothing(self):
        style = style_corpus()
        external = external_corpus(ids=("x0",))
        scores = {("x0", "s0"): 0.4, ("x0", "s1"): 0.4}
        result = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=2))
        assert len(result.judgments) == 0
        assert result.candidates_scanned == 1

    def test_boundary_score_excluded(self):
        style = style_corpus()
        external = external_corpus(ids=("x0",))
        scores = {("x0", "s0"): 0.5, ("x0", "s1"): 0.5}
        result = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=2))
        assert len(result.judgments) == 0

    def test_monotone_in_k(self):
        style = style_corpus()
        external = external_corpus()
        scores = {(x, s): 0.7 for x in ("x0", "x1") for s in ("s0", "s1", "s2")}
        small = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=1))
        large = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=3))
        small_ids = {j.pair_id for j in small.judgments}
        large_ids = {j.pair_id for j in large.judgments}
        assert small_ids <= large_ids
        assert len(large_ids) > len(small_ids)

    def test_deterministic(self):
        style = style_corpus()
        external = external_corpus()
        scores = {(x, s): 0.7 for x in ("x0", "x1") for s in ("s0", "s1", "s2")}
        a = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=2))
        b = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=2))
        assert [j.pair_id for j in a.judgments] == [j.pair_id for j in b.judgments]

    def test_cap_respected_exactly(self):
        style = style_corpus()
        external = external_corpus()
        scores = {(x, s): 0.9 for x in ("x0", "x1") for s in ("s0", "s1", "s2")}
        result = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=3, max_new_pairs=4))
        assert len(result.judgments) == 4
        assert result.candidates_scanned == 2

    def test_emitted_pairs_recheck(self):
        style = style_corpus()
        external = external_corpus()
        rng = np.random.default_rng(1)
        scores = {(x, s): float(rng.uniform(0.2, 0.9)) for x in ("x0", "x1") for s in ("s0", "s1", "s2")}
        result = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=3))
        for j in result.judgments:
            assert scores[(j.a_id, j.b_id)] > 0.5
        for row in result.provenance:
            assert row.score == scores[(row.candidate_id, row.neighbor_id)]

    def test_missing_candidate_embedding(self):
        style = style_corpus()
        external = external_corpus(ids=("x0",))
        del external.embeddings["x0"]
        with pytest.raises(AugmentError, match="x0"):
            augment_pairs(external, style, fixed_scorer({}), AugmentConfig(k=1))

    def test_missing_style_embedding(self):
        style = style_corpus()
        del style.embeddings["s1"]
        with pytest.raises(AugmentError, match="s1"):
            augment_pairs(external_corpus(), style, fixed_scorer({}), AugmentConfig(k=1))

    def test_empty_external(self):
        result = augment_pairs(Corpus(), style_corpus(), fixed_scorer({}), AugmentConfig(k=1))
        report = augment_report(result)
        assert report == {"candidates_scanned": 0, "pairs_added": 0, "per_topic": {}}


class TestReportAndMerge:
    def winning_setup(self):
        style = style_corpus()
        external = external_corpus()
        scores = {(x, s): 0.8 for x in ("x0", "x1") for s in ("s0", "s1", "s2")}
        result = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=2))
        return style, external, result

    def test_report_counts(self):
        style, external, result = self.winning_setup()
        report = augment_report(result)
        assert report["pairs_added"] == len(result.judgments)
        assert sum(report["per_topic"].values()) == report["pairs_added"]
        assert report["candidates_scanned"] == 2

    def test_capped_report(self):
        style = style_corpus()
        external = external_corpus()
        scores = {(x, s): 0.9 for x in ("x0", "x1") for s in ("s0", "s1", "s2")}
        result = augment_pairs(external, style, fixed_scorer(scores), AugmentConfig(k=3, max_new_pairs=2))
        assert augment_report(result)["pairs_added"] == 2

    def test_merge_marks_generated(self):
        style, external, result = self.winning_setup()
        merged = merge_augmented(style, external, result)
        winners = {j.a_id for j in result.judgments}
        for did in winners:
            assert merged.documents[did].source == "generated"
        assert len(merged.judgments) == len(result.judgments)
        assert set(style.documents) <= set(merged.documents)

    def test_save_round_trip(self, tmp_path):
        style, external, result = self.winning_setup()
        save_augmented(result, tmp_path)
        merged = merge_augmented(style, external, result)
        back = load_judgments(tmp_path / "judgments.jsonl", merged)
        assert [j.pair_id for j in back] == [j.pair_id for j in result.judgments]
        lines = (tmp_path / "provenance.tsv").read_text().strip().split("\n")
        assert len(lines) == len(result.provenance)


class TestConfig:
    def test_validation(self):
        with pytest.raises(AugmentError):
            AugmentConfig(k=0)
        with pytest.raises(AugmentError):
            AugmentConfig(min_score=1.0)
        with pytest.raises(AugmentError):
            AugmentConfig(similarity="dot")
