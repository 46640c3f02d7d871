"""Standard readability formulas over tokenized sentences.

All five scores use the package's own syllable counter and the bundled
easy-word list; words are tokens containing at least one alphanumeric
character.
"""

from __future__ import annotations

import math

from stylefuse.features.syllables import count_syllables
from stylefuse.features.wordlists import easy_words, in_list


class DegenerateInputError(ValueError):
    """No words or no sentences; readability undefined."""


def _words(tokens: list[str]) -> list[str]:
    return [t for t in tokens if any(c.isalnum() for c in t)]


def readability(tokens: list[str], n_sentences: int) -> dict[str, float]:
    """Flesch, Flesch-Kincaid, Gunning Fog, SMOG and Dale-Chall scores.

    tokens is the flat token list of the text; n_sentences its sentence count.
    """
    words = _words(tokens)
    if not words or n_sentences < 1:
        raise DegenerateInputError("readability requires at least one word and one sentence")

    n_words = len(words)
    syllable_counts = [count_syllables(w) for w in words]
    n_syllables = sum(syllable_counts)
    n_poly = sum(1 for c in syllable_counts if c >= 3)
    wl = easy_words()
    n_difficult = sum(1 for w in words if not in_list(w, wl))

    words_per_sentence = n_words / n_sentences
    syllables_per_word = n_syllables / n_words
    pct_difficult = 100.0 * n_difficult / n_words

    flesch = 206.835 - 1.015 * words_per_sentence - 84.6 * syllables_per_word
    flesch_kincaid = 0.39 * words_per_sentence + 11.8 * syllables_per_word - 15.59
    gunning_fog = 0.4 * (words_per_sentence + 100.0 * n_poly / n_words)
    smog = 1.0430 * math.sqrt(n_poly * 30.0 / n_sentences) + 3.1291
    dale_chall = 0.1579 * pct_difficult + 0.0496 * words_per_sentence
    if pct_difficult > 5.0:
        dale_chall += 3.6365

    return {
        "flesch": flesch,
        "flesch_kincaid": flesch_kincaid,
        "gunning_fog": gunning_fog,
        "smog": smog,
        "dale_chall": dale_chall,
    }
