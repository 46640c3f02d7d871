"""Bundled word-list resources and membership tests.

Three plain-text lists ship with the package (one token per line):

  easy_words.txt        easy words for the Dale-Chall difficult-word count
  common_words.txt      frequency vocabulary; tokens absent from it count as jargon
  dictionary_words.txt  spelling dictionary; tokens absent from it count as misspelled

Lookups strip common inflections (s/es/ed/ing/...) before deciding a token is
absent, so "walked" matches "walk". Callers may substitute their own lists.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

_SUFFIXES = ("'s", "s'", "n't", "'ll", "'re", "'ve", "'d", "'m",
             "ings", "ing", "edly", "ed", "ies", "es", "s", "ly", "ers", "er", "est")


def _load_list(name: str) -> frozenset[str]:
    text = resources.files("stylefuse.data").joinpath(name).read_text(encoding="utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


@lru_cache(maxsize=None)
def easy_words() -> frozenset[str]:
    return _load_list("easy_words.txt")


@lru_cache(maxsize=None)
def common_words() -> frozenset[str]:
    return _load_list("common_words.txt")


@lru_cache(maxsize=None)
def dictionary_words() -> frozenset[str]:
    return _load_list("dictionary_words.txt")


def load_wordlist(path: str | Path) -> frozenset[str]:
    text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def in_list(token: str, words: frozenset[str]) -> bool:
    """Membership with light suffix stripping; numbers always count as known."""
    t = token.lower()
    if not any(c.isalpha() for c in t):
        return True
    if t in words:
        return True
    for suf in _SUFFIXES:
        if t.endswith(suf) and len(t) > len(suf) + 1:
            stem = t[: -len(suf)]
            if stem in words:
                return True
            # doubled final consonant (running -> run) and dropped e (making -> make)
            if len(stem) >= 2 and stem[-1] == stem[-2] and stem[:-1] in words:
                return True
            if stem + "e" in words:
                return True
    return False
