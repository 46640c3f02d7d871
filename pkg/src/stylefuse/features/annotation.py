"""Features derived from token-level annotations (POS, dependencies, NER).

Dependency distance uses 1-based token indices with head 0 for the root, so
the root edge contributes the root token's index. Total dependencies equals
the token count (every token has exactly one head edge). Average dependencies
normalizes by sentence count; average dependency distance by edge count.
"""

from __future__ import annotations

from stylefuse.corpus import AnnotatedToken
from stylefuse.features.wordlists import common_words, dictionary_words, in_list

UPOS_RATE_NAMES = {
    "NOUN": "noun_rate",
    "VERB": "verb_rate",
    "ADJ": "adjective_rate",
    "ADP": "adposition_rate",
    "ADV": "adverb_rate",
    "AUX": "auxiliary_rate",
    "CCONJ": "conjunction_rate",
    "DET": "determiner_rate",
    "INTJ": "interjection_rate",
    "NUM": "numeral_rate",
    "PART": "particle_rate",
    "PRON": "pronoun_rate",
    "PROPN": "proper_noun_rate",
    "PUNCT": "punctuation_rate",
    "SCONJ": "subordinating_conjunction_rate",
    "SYM": "symbol_rate",
}

NER_TAGS = (
    "PERSON", "DATE", "CARDINAL", "WORK_OF_ART", "NORP", "GPE", "ORG", "LOC",
    "PERCENT", "MONEY", "QUANTITY", "TIME", "PRODUCT", "EVENT", "LANGUAGE", "FAC",
)

CLOSED_CLASS = {"ADP", "AUX", "CCONJ", "DET", "NUM", "PART", "PRON", "SCONJ"}
OPEN_CLASS = {"ADJ", "ADV", "INTJ", "NOUN", "PROPN", "VERB"}
DEMONSTRATIVES = {"this", "that", "these", "those"}


def annotation_rates(sentences: list[list[AnnotatedToken]]) -> dict[str, float | None]:
    """Rates and dependency statistics over annotated sentences of one document."""
    tokens = [t for sent in sentences for t in sent]
    if not tokens:
        raise ValueError("annotation_rates requires at least one annotated token")
    n = len(tokens)
    n_sent = len(sentences)

    out: dict[str, float | None] = {}
    for upos, name in UPOS_RATE_NAMES.items():
        out[name] = sum(1 for t in tokens if t.upos == upos) / n

    out["demonstrative_rate"] = sum(1 for t in tokens if t.lemma.lower() in DEMONSTRATIVES) / n
    out["possessive_rate"] = (
        sum(
            1
            for t in tokens
            if t.feats.get("Poss") == "Yes"
            or (t.upos == "PART" and t.surface.lower() in {"'s", "s'"})
        )
        / n
    )

    n_closed = sum(1 for t in tokens if t.upos in CLOSED_CLASS)
    n_open = sum(1 for t in tokens if t.upos in OPEN_CLASS)
    out["closed_class_rate"] = n_closed / n
    out["open_class_rate"] = n_open / n

    n_noun = sum(1 for t in tokens if t.upos == "NOUN")
    n_verb_only = sum(1 for t in tokens if t.upos == "VERB")
    n_pron = sum(1 for t in tokens if t.upos == "PRON")
    out["noun_verb_ratio"] = n_noun / n_verb_only if n_verb_only else None
    out["pronoun_noun_ratio"] = n_pron / n_noun if n_noun else None

    verbs = [t for t in tokens if t.upos in ("VERB", "AUX")]
    n_verbs = len(verbs)
    if n_verbs:
        tensed = [t for t in verbs if "Tense" in t.feats]
        if tensed:
            out["past_tense_ratio"] = sum(
                1 for t in verbs if t.feats.get("Tense") == "Past"
            ) / n_verbs
            out["present_tense_ratio"] = sum(
                1 for t in verbs if t.feats.get("Tense") == "Pres"
            ) / n_verbs
        else:
            out["past_tense_ratio"] = None
            out["present_tense_ratio"] = None
        out["future_tense_ratio"] = sum(
            1 for t in verbs if t.upos == "AUX" and t.lemma.lower() in {"will", "shall"}
        ) / n_verbs
        out["inflected_verb_ratio"] = sum(
            1 for t in verbs if t.surface.lower() != t.lemma.lower()
        ) / n_verbs
        out["auxiliary_verb_ratio"] = sum(1 for t in verbs if t.upos == "AUX") / n_verbs
        out["gerund_verb_ratio"] = sum(1 for t in verbs if _is_gerund(t)) / n_verbs
        out["participle_ratio"] = sum(1 for t in verbs if _is_participle(t)) / n_verbs
        if any("Mtcg" in t.feats for t in tokens):
            out["mtcg_verb_ratio"] = sum(1 for t in verbs if "Mtcg" in t.feats) / n_verbs
        else:
            out["mtcg_verb_ratio"] = None
    else:
        for name in (
            "past_tense_ratio", "present_tense_ratio", "future_tense_ratio",
            "inflected_verb_ratio", "auxiliary_verb_ratio", "gerund_verb_ratio",
            "participle_ratio", "mtcg_verb_ratio",
        ):
            out[name] = None

    if any("Allit" in t.feats for t in tokens):
        out["alliteration"] = sum(1 for t in tokens if t.feats.get("Allit") == "Yes") / n
    else:
        out["alliteration"] = None

    out["passive_count"] = float(
        sum(
            1
            for t in tokens
            if (t.deprel.endswith(":pass") and t.deprel.split(":")[0] in {"nsubj", "csubj"})
            or t.deprel in {"nsubjpass", "csubjpass"}
        )
    )

    td = 0
    tdd = 0
    for sent in sentences:
        for i, tok in enumerate(sent, 1):
            td += 1
            tdd += abs(i - tok.head)
    out["total_dependencies"] = float(td)
    out["average_dependencies"] = td / n_sent
    out["total_dependency_distance"] = float(tdd)
    out["average_dependency_distance"] = tdd / td

    for tag in NER_TAGS:
        out[f"ner_rate_{tag.lower()}"] = sum(1 for t in tokens if t.ner == tag) / n

    word_surfaces = [t.surface for t in tokens if any(c.isalpha() for c in t.surface)]
    if word_surfaces:
        cw, dw = common_words(), dictionary_words()
        out["jargon_ratio"] = sum(1 for w in word_surfaces if not in_list(w, cw)) / len(
            word_surfaces
        )
        out["misspelling_ratio"] = sum(
            1 for w in word_surfaces if not in_list(w, dw)
        ) / len(word_surfaces)
    else:
        out["jargon_ratio"] = None
        out["misspelling_ratio"] = None

    # propositional-density approximation (experimental)
    out["idea_density"] = sum(
        1 for t in tokens if t.upos in {"VERB", "ADJ", "ADV", "ADP", "CCONJ", "SCONJ"}
    ) / n
    out["content_density"] = n_open / n_closed if n_closed else None
    return out


def _is_gerund(tok: AnnotatedToken) -> bool:
    if "VerbForm" in tok.feats:
        return tok.feats["VerbForm"] == "Ger"
    return tok.surface.lower().endswith("ing")


def _is_participle(tok: AnnotatedToken) -> bool:
    if "VerbForm" in tok.feats:
        return tok.feats["VerbForm"] == "Part"
    return tok.surface.lower().endswith(("ed", "en"))
