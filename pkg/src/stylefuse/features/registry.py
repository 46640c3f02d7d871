"""Feature registry: per-document vectors and corpus-level matrices.

Three provenance groups. Native features come straight from the text, so
they always exist. Annotation-derived and embedding-derived features exist
only when the corpus carries annotations or embeddings for the document;
otherwise they are missing, and missing propagates as missing (NaN in
matrices), never as zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from stylefuse.corpus import Corpus, Document, word_tokens
from stylefuse.features.annotation import annotation_rates
from stylefuse.features.lexical import lexical_diversity
from stylefuse.features.readability import DegenerateInputError, readability
from stylefuse.features.syllables import count_syllables
from stylefuse.features.trajectory import trajectory_features
from stylefuse.features.wordlists import common_words, dictionary_words, in_list

NATIVE_FEATURES = (
    "length",
    "token_count",
    "word_count",
    "sentence_count",
    "average_word_length",
    "average_sentence_length",
    "average_syllables",
    "flesch",
    "flesch_kincaid",
    "gunning_fog",
    "smog",
    "dale_chall",
    "ttr",
    "honore",
    "brunet",
    "jargon_ratio",
    "misspelling_ratio",
)

ANNOTATION_FEATURES = (
    "noun_rate",
    "verb_rate",
    "adjective_rate",
    "adposition_rate",
    "adverb_rate",
    "auxiliary_rate",
    "conjunction_rate",
    "determiner_rate",
    "interjection_rate",
    "numeral_rate",
    "particle_rate",
    "pronoun_rate",
    "proper_noun_rate",
    "punctuation_rate",
    "subordinating_conjunction_rate",
    "symbol_rate",
    "demonstrative_rate",
    "possessive_rate",
    "closed_class_rate",
    "open_class_rate",
    "noun_verb_ratio",
    "pronoun_noun_ratio",
    "past_tense_ratio",
    "present_tense_ratio",
    "future_tense_ratio",
    "inflected_verb_ratio",
    "auxiliary_verb_ratio",
    "gerund_verb_ratio",
    "participle_ratio",
    "mtcg_verb_ratio",
    "alliteration",
    "passive_count",
    "total_dependencies",
    "average_dependencies",
    "total_dependency_distance",
    "average_dependency_distance",
    "ner_rate_person",
    "ner_rate_date",
    "ner_rate_cardinal",
    "ner_rate_work_of_art",
    "ner_rate_norp",
    "ner_rate_gpe",
    "ner_rate_org",
    "ner_rate_loc",
    "ner_rate_percent",
    "ner_rate_money",
    "ner_rate_quantity",
    "ner_rate_time",
    "ner_rate_product",
    "ner_rate_event",
    "ner_rate_language",
    "ner_rate_fac",
    "idea_density",
    "content_density",
)

EMBEDDING_FEATURES = ("speed", "volume", "circuitousness")

DEFAULT_REGISTRY = NATIVE_FEATURES + ANNOTATION_FEATURES + EMBEDDING_FEATURES

_PROVENANCE = {name: "native" for name in NATIVE_FEATURES}
_PROVENANCE.update({name: "annotation_derived" for name in ANNOTATION_FEATURES})
_PROVENANCE.update({name: "embedding_derived" for name in EMBEDDING_FEATURES})


@dataclass
class FeatureVector:
    doc_id: str
    names: tuple[str, ...]
    values: dict[str, float | None] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in self.names:
            v = self.values.get(name)
            if v is not None and not math.isfinite(v):
                raise ValueError(f"{self.doc_id}: non-finite value for {name!r}")
            if v is None:
                self.provenance[name] = "missing"

    def get(self, name: str) -> float | None:
        if name not in self.names:
            raise KeyError(name)
        return self.values.get(name)

    def is_missing(self, name: str) -> bool:
        return self.get(name) is None

    def as_array(self, names: tuple[str, ...] | None = None) -> np.ndarray:
        names = names if names is not None else self.names
        return np.array(
            [self.values.get(n) if self.values.get(n) is not None else np.nan for n in names],
            dtype=float,
        )


@dataclass
class FeatureMatrix:
    doc_ids: list[str]
    names: list[str]
    values: np.ndarray
    standardized: bool = False
    means: np.ndarray | None = None
    sds: np.ndarray | None = None
    constant_columns: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.doc_ids), len(self.names)):
            raise ValueError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.doc_ids)} ids x {len(self.names)} names"
            )

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def row(self, doc_id: str) -> np.ndarray:
        return self.values[self.doc_ids.index(doc_id)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["doc_id", *self.names])
            for doc_id, row in zip(self.doc_ids, self.values):
                writer.writerow(
                    [doc_id] + ["" if np.isnan(v) else repr(float(v)) for v in row]
                )


def stats_to_csv(matrix: FeatureMatrix, path) -> None:
    """Column statistics sidecar for a standardized matrix."""
    if not matrix.standardized:
        raise ValueError("matrix is not standardized; no statistics to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "mean", "sd", "constant"])
        for j, name in enumerate(matrix.names):
            mean = matrix.means[j] if matrix.means is not None else np.nan
            sd = matrix.sds[j] if matrix.sds is not None else np.nan
            writer.writerow(
                [
                    name,
                    "" if np.isnan(mean) else repr(float(mean)),
                    "" if np.isnan(sd) else repr(float(sd)),
                    int(name in matrix.constant_columns),
                ]
            )


def matrix_from_csv(path, stats_path=None) -> FeatureMatrix:
    """Rebuild a matrix from write_csv output; a stats sidecar restores
    standardization metadata."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "doc_id":
            raise ValueError(f"{path}: expected a doc_id-led header row")
        names = header[1:]
        doc_ids, rows = [], []
        for row in reader:
            if len(row) != len(header):
                raise ValueError(f"{path}: row for {row[0]!r} has {len(row)} fields")
            doc_ids.append(row[0])
            rows.append([np.nan if v == "" else float(v) for v in row[1:]])
    matrix = FeatureMatrix(doc_ids, names, np.array(rows, dtype=float).reshape(len(doc_ids), len(names)))
    if stats_path is None:
        return matrix
    means = np.full(len(names), np.nan)
    sds = np.full(len(names), np.nan)
    constant: list[str] = []
    with open(stats_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if row["feature"] not in names:
                raise ValueError(f"{stats_path}: unknown feature {row['feature']!r}")
            j = names.index(row["feature"])
            means[j] = np.nan if row["mean"] == "" else float(row["mean"])
            sds[j] = np.nan if row["sd"] == "" else float(row["sd"])
            if row["constant"] == "1":
                constant.append(row["feature"])
    matrix.standardized = True
    matrix.means = means
    matrix.sds = sds
    matrix.constant_columns = constant
    return matrix


def supported_features() -> tuple[str, ...]:
    return DEFAULT_REGISTRY


def _check_registry(registry) -> list[str]:
    names = list(registry)
    unsupported = [n for n in names if n not in _PROVENANCE]
    if unsupported:
        raise ValueError(f"unsupported feature name(s): {', '.join(unsupported)}")
    return names


def features_from_tokens(
    token_sentences: list[list[str]], text: str | None = None
) -> dict[str, float | None]:
    """Native features for bare tokenized text (e.g. generated sequences)."""
    tokens = [t for sent in token_sentences for t in sent]
    n_sent = max(len(token_sentences), 1)
    if text is None:
        text = " ".join(tokens)
    out: dict[str, float | None] = {name: None for name in NATIVE_FEATURES}
    out["length"] = float(len(text))
    out["token_count"] = float(len(tokens))
    out["sentence_count"] = float(n_sent)
    words = [t for t in tokens if any(c.isalnum() for c in t)]
    out["word_count"] = float(len(words))
    if not words:
        return out
    out["average_word_length"] = sum(len(w) for w in words) / len(words)
    out["average_sentence_length"] = len(words) / n_sent
    out["average_syllables"] = sum(count_syllables(w) for w in words) / len(words)
    try:
        out.update(readability(tokens, n_sent))
    except DegenerateInputError:
        pass
    lex = lexical_diversity(words)
    out["ttr"] = lex["ttr"]
    out["honore"] = lex["honore"]
    out["brunet"] = lex["brunet"]
    cw, dw = common_words(), dictionary_words()
    out["jargon_ratio"] = sum(1 for w in words if not in_list(w, cw)) / len(words)
    out["misspelling_ratio"] = sum(1 for w in words if not in_list(w, dw)) / len(words)
    return out


def extract_features(
    doc: Document, corpus: Corpus | None = None, registry=DEFAULT_REGISTRY
) -> FeatureVector:
    """One document's feature vector, with per-feature provenance."""
    names = _check_registry(registry)
    token_sents = doc.token_sentences()
    values: dict[str, float | None] = {}
    provenance: dict[str, str] = {}

    native = features_from_tokens(token_sents, text=doc.text)
    ann: dict[str, float | None] = {}
    traj: dict[str, float | None] = {}
    if corpus is not None:
        sents = corpus.annotations.get(doc.id)
        if sents:
            ann = annotation_rates(sents)
        seq = corpus.embeddings.get(doc.id)
        if seq is not None:
            traj = trajectory_features(seq)

    for name in names:
        prov = _PROVENANCE[name]
        if prov == "native":
            value = native.get(name)
        elif prov == "annotation_derived":
            value = ann.get(name)
        else:
            value = traj.get(name)
        values[name] = value
        provenance[name] = prov if value is not None else "missing"
    return FeatureVector(doc.id, tuple(names), values, provenance)


def build_matrix(
    corpus: Corpus, registry=DEFAULT_REGISTRY, standardize: bool = False
) -> FeatureMatrix:
    """Stack per-document vectors; optionally z-score columns.

    Standardization uses sample statistics (ddof = 1) over the non-missing
    entries of each column. Constant and all-missing columns are left raw
    and listed in constant_columns. Missing entries stay NaN either way.
    """
    names = _check_registry(registry)
    docs = list(corpus.documents.values())
    if not docs:
        raise ValueError("corpus has no documents")
    if standardize and len(docs) < 2:
        raise ValueError("standardization needs at least 2 documents (sd undefined)")

    rows = [extract_features(d, corpus, names).as_array(tuple(names)) for d in docs]
    values = np.vstack(rows)
    matrix = FeatureMatrix([d.id for d in docs], names, values)
    if not standardize:
        return matrix

    means = np.full(len(names), np.nan)
    sds = np.full(len(names), np.nan)
    constant: list[str] = []
    for j, name in enumerate(names):
        col = values[:, j]
        ok = ~np.isnan(col)
        if ok.sum() < 2:
            constant.append(name)
            continue
        m = float(col[ok].mean())
        s = float(col[ok].std(ddof=1))
        means[j] = m
        sds[j] = s
        if s < 1e-12:
            constant.append(name)
            continue
        values[ok, j] = (col[ok] - m) / s
    matrix.standardized = True
    matrix.means = means
    matrix.sds = sds
    matrix.constant_columns = constant
    return matrix
