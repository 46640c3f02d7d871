"""Bootstrapped judgment expansion from an external topical corpus.

Each external candidate is compared against its nearest styled documents;
whenever the discriminator prefers the candidate over a neighbor, that win
becomes a new training pair. The scan is exact brute force: at desk scale
an approximate index would only add a failure mode.
"""

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .corpus import Corpus, Document, EmbeddingSequence, JudgmentSet, PairJudgment


class AugmentError(ValueError):
    pass


@dataclass
class AugmentConfig:
    k: int = 5
    similarity: str = "cosine"
    min_score: float = 0.5
    max_new_pairs: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise AugmentError("k must be at least 1")
        if self.similarity != "cosine":
            raise AugmentError(f"unsupported similarity {self.similarity!r}")
        if not (0.0 < self.min_score < 1.0):
            raise AugmentError("min_score must lie in (0,1)")
        if self.max_new_pairs is not None and self.max_new_pairs < 0:
            raise AugmentError("max_new_pairs must be nonnegative")


def pooled_vector(seq: EmbeddingSequence) -> np.ndarray:
    """One vector per document: the mean of its unit vectors."""
    return seq.vectors.mean(axis=0)


def _cosine(query: np.ndarray, rows: np.ndarray) -> np.ndarray:
    qn = float(np.linalg.norm(query))
    norms = np.linalg.norm(rows, axis=1)
    sims = np.zeros(len(rows))
    ok = (norms > 0) & (qn > 0)
    if np.any(ok):
        sims[ok] = (rows[ok] @ query) / (norms[ok] * qn)
    return sims


def topk_similar(query: np.ndarray, pool: dict[str, np.ndarray], k: int) -> list[str]:
    """Ids of the k most cosine-similar pool vectors, descending, ties by id."""
    if not pool:
        raise AugmentError("empty pool")
    query = np.asarray(query, dtype=float)
    ids = sorted(pool)
    rows = np.stack([np.asarray(pool[i], dtype=float) for i in ids])
    if rows.shape[1] != query.shape[0]:
        raise AugmentError(f"query dimension {query.shape[0]} does not match pool dimension {rows.shape[1]}")
    if k > len(ids):
        warnings.warn(f"k={k} exceeds pool size {len(ids)}; returning all", RuntimeWarning, stacklevel=2)
        k = len(ids)
    sims = _cosine(query, rows)
    order = sorted(range(len(ids)), key=lambda i: (-sims[i], ids[i]))
    return [ids[i] for i in order[:k]]


@dataclass
class ProvenanceRow:
    candidate_id: str
    neighbor_id: str
    score: float


@dataclass
class AugmentResult:
    judgments: JudgmentSet
    provenance: list[ProvenanceRow] = field(default_factory=list)
    candidates_scanned: int = 0


Scorer = Callable[[str, str], float]


def feature_scorer(ranker, features, table=None) -> Scorer:
    """Compose score-file overrides with the feature model.

    `features` maps doc id to FeatureVector for every document that may be
    scored. Missing entries surface as errors at scoring time.
    """
    from .ranker import scored_probability

    def score(a_id: str, b_id: str) -> float:
        return scored_probability(ranker, table, a_id, b_id, features.get(a_id), features.get(b_id))

    return score


def augment_pairs(
    external: Corpus,
    style: Corpus,
    discriminator: Scorer,
    config: AugmentConfig | None = None,
) -> AugmentResult:
    """Emit one pair per neighbor the candidate beats, capped in candidate order."""
    if config is None:
        config = AugmentConfig()
    pool = {}
    for did, doc in style.documents.items():
        if did not in style.embeddings:
            raise AugmentError(f"style document {did!r} has no embedding")
        pool[did] = pooled_vector(style.embeddings[did])
    result = AugmentResult(judgments=JudgmentSet())
    if not external.documents:
        return result
    if not pool:
        raise AugmentError("style corpus has no embedded documents")

    cap = config.max_new_pairs
    k = min(config.k, len(pool))
    for cand_id in sorted(external.documents):
        if cand_id not in external.embeddings:
            raise AugmentError(f"candidate {cand_id!r} has no embedding")
        result.candidates_scanned += 1
        if cap is not None and len(result.judgments) >= cap:
            continue  # keep scanning for the report, add nothing further
        query = pooled_vector(external.embeddings[cand_id])
        for neighbor_id in topk_similar(query, pool, k):
            score = discriminator(cand_id, neighbor_id)
            if not (score > config.min_score):
                continue
            if cap is not None and len(result.judgments) >= cap:
                break
            topic = style.documents[neighbor_id].topic
            result.judgments.judgments.append(
                PairJudgment(
                    pair_id=f"aug-{cand_id}-{neighbor_id}",
                    a_id=cand_id,
                    b_id=neighbor_id,
                    topic=topic,
                )
            )
            result.provenance.append(ProvenanceRow(cand_id, neighbor_id, float(score)))
    return result


def augment_report(result: AugmentResult) -> dict:
    per_topic: dict[str, int] = {}
    for j in result.judgments:
        per_topic[j.topic] = per_topic.get(j.topic, 0) + 1
    return {
        "candidates_scanned": result.candidates_scanned,
        "pairs_added": len(result.judgments),
        "per_topic": dict(sorted(per_topic.items())),
    }


def merge_augmented(style: Corpus, external: Corpus, result: AugmentResult) -> Corpus:
    """Style corpus plus the winning candidates, marked as generated material."""
    docs = dict(style.documents)
    embeds = dict(style.embeddings)
    annots = dict(style.annotations)
    for j in result.judgments:
        cand = j.a_id
        if cand in docs:
            continue
        src = external.documents.get(cand)
        if src is None:
            raise AugmentError(f"augmented pair references unknown candidate {cand!r}")
        # A candidate can win into several topics, so it keeps its own topic
        # label (usually empty for external text) rather than inheriting one.
        docs[cand] = Document(id=src.id, text=src.text, topic=src.topic, source="generated", sentences=src.sentences)
        if cand in external.embeddings:
            embeds[cand] = external.embeddings[cand]
        if cand in external.annotations:
            annots[cand] = external.annotations[cand]
    merged = Corpus(
        documents=docs,
        judgments=JudgmentSet(list(style.judgments) + list(result.judgments)),
        annotations=annots,
        embeddings=embeds,
    )
    merged.validate()
    return merged


def save_augmented(result: AugmentResult, out_dir) -> None:
    """judgments.jsonl alongside a provenance.tsv of (candidate, neighbor, score)."""
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "judgments.jsonl", "w") as fh:
        for j in result.judgments:
            fh.write(
                json.dumps(
                    {"pair_id": j.pair_id, "a_id": j.a_id, "b_id": j.b_id, "topic": j.topic, "tie": j.tie}
                )
                + "\n"
            )
    with open(out / "provenance.tsv", "w") as fh:
        for row in result.provenance:
            fh.write(f"{row.candidate_id}\t{row.neighbor_id}\t{repr(row.score)}\n")
