"""Data model and flat-file IO for documents, pairwise judgments, annotations, embeddings.

Interchange formats:
  documents.jsonl    one JSON object per line: id, text, topic, source (+optional sentences)
  judgments.jsonl    pair_id, a_id, b_id, topic, tie
  annotations.conllu standard 10-column CoNLL-U; `# doc_id = <id>` comments bind blocks
  embeddings.tsv     header `#dim <D> #unit <token|sentence>`, rows `doc_id\tidx\tf1 ... fD`

A loaded Corpus is treated as immutable and is safe to share across threads.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

SOURCES = ("style_corpus", "external_corpus", "generated")

_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+")
_TOKEN = re.compile(r"\w+(?:'\w+)?|[^\w\s]")


class CorpusError(ValueError):
    """Malformed or inconsistent corpus data (message carries file/line context)."""


def word_tokens(text: str) -> list[str]:
    """Split text into word and punctuation tokens."""
    return _TOKEN.findall(text)


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence split on terminal punctuation."""
    parts = [p.strip() for p in _SENT_SPLIT.split(text)]
    return [p for p in parts if p]


@dataclass
class Document:
    id: str
    text: str
    topic: str
    source: str = "style_corpus"
    sentences: list[list[str]] | None = None

    def __post_init__(self):
        if not self.id:
            raise CorpusError("document id must be nonempty")
        if self.source not in SOURCES:
            raise CorpusError(f"document {self.id!r}: unknown source {self.source!r}")

    def token_sentences(self) -> list[list[str]]:
        """Sentences as token lists, derived by rule-based splitting when absent."""
        if self.sentences is not None:
            return self.sentences
        return [word_tokens(s) for s in split_sentences(self.text)]

    def tokens(self) -> list[str]:
        return [t for sent in self.token_sentences() for t in sent]


@dataclass
class AnnotatedToken:
    surface: str
    lemma: str
    upos: str
    head: int
    deprel: str
    ner: str | None = None
    feats: dict[str, str] = field(default_factory=dict)


@dataclass
class EmbeddingSequence:
    doc_id: str
    vectors: np.ndarray  # (n, dim)
    unit: str = "sentence"  # "token" or "sentence"

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim != 2 or self.vectors.shape[0] == 0:
            raise CorpusError(f"embedding for {self.doc_id!r}: need a nonempty 2-d vector array")
        if not np.all(np.isfinite(self.vectors)):
            raise CorpusError(f"embedding for {self.doc_id!r}: non-finite entry")
        if self.unit not in ("token", "sentence"):
            raise CorpusError(f"embedding for {self.doc_id!r}: unknown unit {self.unit!r}")


@dataclass
class PairJudgment:
    """One audience comparison; document a_id is the more-styled (winning) text."""

    pair_id: str
    a_id: str
    b_id: str
    topic: str
    tie: bool = False

    def __post_init__(self):
        if self.a_id == self.b_id:
            raise CorpusError(f"judgment {self.pair_id!r}: self-pair {self.a_id!r}")


class JudgmentSet:
    """Ordered collection of pairwise judgments."""

    def __init__(self, judgments: Iterable[PairJudgment] = ()):
        self.judgments: list[PairJudgment] = list(judgments)

    def __len__(self) -> int:
        return len(self.judgments)

    def __iter__(self) -> Iterator[PairJudgment]:
        return iter(self.judgments)

    def __getitem__(self, i):
        return self.judgments[i]

    def topics(self) -> list[str]:
        return sorted({j.topic for j in self.judgments})

    def non_tied(self) -> "JudgmentSet":
        return JudgmentSet(j for j in self.judgments if not j.tie)

    def for_topics(self, topics: set[str]) -> "JudgmentSet":
        return JudgmentSet(j for j in self.judgments if j.topic in topics)


@dataclass
class Corpus:
    documents: dict[str, Document] = field(default_factory=dict)
    judgments: JudgmentSet = field(default_factory=JudgmentSet)
    annotations: dict[str, list[list[AnnotatedToken]]] = field(default_factory=dict)
    embeddings: dict[str, EmbeddingSequence] = field(default_factory=dict)

    def validate(self) -> None:
        for j in self.judgments:
            for did in (j.a_id, j.b_id):
                if did not in self.documents:
                    raise CorpusError(f"judgment {j.pair_id!r}: unknown document {did!r}")
            for did in (j.a_id, j.b_id):
                doc_topic = self.documents[did].topic
                if doc_topic and j.topic and doc_topic != j.topic:
                    raise CorpusError(
                        f"judgment {j.pair_id!r}: topic {j.topic!r} does not match "
                        f"document {did!r} topic {doc_topic!r}"
                    )
        for did in self.annotations:
            if did not in self.documents:
                raise CorpusError(f"annotations reference unknown document {did!r}")
        dim = None
        for did, seq in self.embeddings.items():
            if did not in self.documents:
                raise CorpusError(f"embeddings reference unknown document {did!r}")
            if dim is None:
                dim = seq.dimension
            elif seq.dimension != dim:
                raise CorpusError(
                    f"embedding for {did!r}: dimension {seq.dimension} != corpus dimension {dim}"
                )


# ---------------------------------------------------------------------------
# Loaders
# ---------------------------------------------------------------------------

def load_documents(path: str | Path) -> Corpus:
    """Load a documents.jsonl file into a fresh Corpus. Duplicate ids are rejected."""
    path = Path(path)
    corpus = Corpus()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON: {exc}") from None
            try:
                doc = Document(
                    id=str(rec["id"]),
                    text=str(rec["text"]),
                    topic=str(rec.get("topic", "")),
                    source=str(rec.get("source", "style_corpus")),
                    sentences=rec.get("sentences"),
                )
            except KeyError as exc:
                raise CorpusError(f"{path}:{lineno}: missing field {exc}") from None
            if doc.id in corpus.documents:
                raise CorpusError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            corpus.documents[doc.id] = doc
    return corpus


def load_judgments(path: str | Path, corpus: Corpus) -> JudgmentSet:
    """Load judgments.jsonl and attach to the corpus. Ties are flagged, not dropped."""
    path = Path(path)
    judgments = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON: {exc}") from None
            try:
                j = PairJudgment(
                    pair_id=str(rec["pair_id"]),
                    a_id=str(rec["a_id"]),
                    b_id=str(rec["b_id"]),
                    topic=str(rec.get("topic", "")),
                    tie=bool(rec.get("tie", False)),
                )
            except KeyError as exc:
                raise CorpusError(f"{path}:{lineno}: missing field {exc}") from None
            for did in (j.a_id, j.b_id):
                if did not in corpus.documents:
                    raise CorpusError(f"{path}:{lineno}: dangling document id {did!r}")
            judgments.append(j)
    jset = JudgmentSet(judgments)
    corpus.judgments = jset
    corpus.validate()
    return jset


def _parse_feats(raw: str) -> dict[str, str]:
    if raw in ("_", ""):
        return {}
    out = {}
    for item in raw.split("|"):
        if "=" in item:
            k, v = item.split("=", 1)
            out[k] = v
    return out


def _parse_misc_ner(raw: str) -> str | None:
    for item in _parse_feats(raw).items():
        if item[0].upper() == "NER" and item[1] not in ("O", "_", ""):
            return item[1]
    return None


def load_annotations(path: str | Path, corpus: Corpus) -> int:
    """Load CoNLL-U annotations; returns the number of sentences attached.

    Sentences are bound to documents by `# doc_id = <id>` comments. Multiword
    ranges (1-2) and empty nodes (1.1) are skipped; each sentence must have
    exactly one root (head 0) and all heads in range.
    """
    path = Path(path)
    count = 0
    doc_id: str | None = None
    tokens: list[AnnotatedToken] = []
    start_line = 0

    def flush(lineno: int) -> None:
        nonlocal tokens, count
        if not tokens:
            return
        if doc_id is None:
            raise CorpusError(f"{path}:{start_line}: sentence without a doc_id comment")
        if doc_id not in corpus.documents:
            raise CorpusError(f"{path}:{start_line}: unknown document id {doc_id!r}")
        n = len(tokens)
        roots = sum(1 for t in tokens if t.head == 0)
        if roots != 1:
            raise CorpusError(f"{path}:{start_line}: sentence has {roots} roots, expected 1")
        for t in tokens:
            if not 0 <= t.head <= n:
                raise CorpusError(f"{path}:{start_line}: head {t.head} outside [0, {n}]")
        corpus.annotations.setdefault(doc_id, []).append(tokens)
        tokens = []
        count += 1

    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                flush(lineno)
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*doc_id\s*=\s*(.+)", line)
                if m:
                    flush(lineno)
                    doc_id = m.group(1).strip()
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise CorpusError(f"{path}:{lineno}: expected 10 columns, got {len(cols)}")
            if "-" in cols[0] or "." in cols[0]:
                continue
            if not tokens:
                start_line = lineno
            try:
                head = int(cols[6])
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: non-integer head {cols[6]!r}") from None
            tokens.append(
                AnnotatedToken(
                    surface=cols[1],
                    lemma=cols[2] if cols[2] != "_" else cols[1],
                    upos=cols[3],
                    head=head,
                    deprel=cols[7],
                    ner=_parse_misc_ner(cols[9]),
                    feats=_parse_feats(cols[5]),
                )
            )
        flush(lineno if tokens else 0)
    return count


def load_embeddings(path: str | Path, corpus: Corpus) -> int:
    """Load an embeddings.tsv file; returns the number of documents attached.

    Dimension consistency is enforced across the whole corpus, and any
    non-finite entry is rejected with its row number.
    """
    path = Path(path)
    dim: int | None = None
    unit = "sentence"
    rows: dict[str, list[np.ndarray]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                m = re.match(r"#dim\s+(\d+)\s+#unit\s+(\w+)", line)
                if m:
                    dim = int(m.group(1))
                    unit = m.group(2)
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise CorpusError(f"{path}:{lineno}: expected doc_id, idx and values")
            did, idx_s = parts[0], parts[1]
            if did not in corpus.documents:
                raise CorpusError(f"{path}:{lineno}: unknown document id {did!r}")
            try:
                vec = np.array([float(v) for v in parts[2:]], dtype=float)
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: non-numeric value") from None
            if dim is not None and vec.shape[0] != dim:
                raise CorpusError(
                    f"{path}:{lineno}: dimension {vec.shape[0]} != declared {dim}"
                )
            if dim is None:
                dim = vec.shape[0]
            if not np.all(np.isfinite(vec)):
                raise CorpusError(f"{path}:{lineno}: non-finite value")
            seq = rows.setdefault(did, [])
            if int(idx_s) != len(seq):
                raise CorpusError(
                    f"{path}:{lineno}: index {idx_s} out of order for document {did!r}"
                )
            seq.append(vec)
    for did, vecs in rows.items():
        if did in corpus.embeddings:
            raise CorpusError(f"{path}: document {did!r} already has embeddings")
        corpus.embeddings[did] = EmbeddingSequence(did, np.vstack(vecs), unit=unit)
    corpus.validate()
    return len(rows)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _float_repr(x: float) -> str:
    return repr(float(x))


def save_corpus(corpus: Corpus, out_dir: str | Path) -> dict[str, Path]:
    """Write a Corpus back to its interchange files. Floats round-trip bit-exactly."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    doc_path = out_dir / "documents.jsonl"
    with doc_path.open("w", encoding="utf-8") as fh:
        for doc in corpus.documents.values():
            rec = {"id": doc.id, "text": doc.text, "topic": doc.topic, "source": doc.source}
            if doc.sentences is not None:
                rec["sentences"] = doc.sentences
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    written["documents"] = doc_path

    jpath = out_dir / "judgments.jsonl"
    with jpath.open("w", encoding="utf-8") as fh:
        for j in corpus.judgments:
            rec = {
                "pair_id": j.pair_id,
                "a_id": j.a_id,
                "b_id": j.b_id,
                "topic": j.topic,
                "tie": j.tie,
            }
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    written["judgments"] = jpath

    if corpus.annotations:
        apath = out_dir / "annotations.conllu"
        with apath.open("w", encoding="utf-8") as fh:
            for did in corpus.annotations:
                for sent in corpus.annotations[did]:
                    fh.write(f"# doc_id = {did}\n")
                    for i, tok in enumerate(sent, 1):
                        feats = (
                            "|".join(f"{k}={v}" for k, v in sorted(tok.feats.items()))
                            if tok.feats
                            else "_"
                        )
                        misc = f"NER={tok.ner}" if tok.ner else "_"
                        fh.write(
                            "\t".join(
                                [
                                    str(i),
                                    tok.surface,
                                    tok.lemma,
                                    tok.upos,
                                    "_",
                                    feats,
                                    str(tok.head),
                                    tok.deprel,
                                    "_",
                                    misc,
                                ]
                            )
                            + "\n"
                        )
                    fh.write("\n")
        written["annotations"] = apath

    if corpus.embeddings:
        epath = out_dir / "embeddings.tsv"
        first = next(iter(corpus.embeddings.values()))
        with epath.open("w", encoding="utf-8") as fh:
            fh.write(f"#dim {first.dimension} #unit {first.unit}\n")
            for did, seq in corpus.embeddings.items():
                for idx, vec in enumerate(seq.vectors):
                    vals = "\t".join(_float_repr(v) for v in vec)
                    fh.write(f"{did}\t{idx}\t{vals}\n")
        written["embeddings"] = epath
    return written


def load_corpus(in_dir: str | Path) -> Corpus:
    """Load a directory written by save_corpus (or by the exporter)."""
    in_dir = Path(in_dir)
    corpus = load_documents(in_dir / "documents.jsonl")
    jpath = in_dir / "judgments.jsonl"
    if jpath.exists():
        load_judgments(jpath, corpus)
    apath = in_dir / "annotations.conllu"
    if apath.exists():
        load_annotations(apath, corpus)
    epath = in_dir / "embeddings.tsv"
    if epath.exists():
        load_embeddings(epath, corpus)
    corpus.validate()
    return corpus


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def split_holdout_topics(
    judgments: JudgmentSet, holdout: set[str]
) -> tuple[JudgmentSet, JudgmentSet]:
    """Partition a judgment set into train (topics not held out) and test (held out).

    The partition is exact: ties are retained and |train| + |test| = |judgments|.
    """
    known = set(judgments.topics())
    unknown = set(holdout) - known
    if unknown:
        raise CorpusError(f"unknown holdout topics: {sorted(unknown)}")
    train = JudgmentSet(j for j in judgments if j.topic not in holdout)
    test = JudgmentSet(j for j in judgments if j.topic in holdout)
    if len(judgments) > 0 and len(train) == 0:
        raise CorpusError("holdout covers every topic; train split is empty")
    return train, test
