"""Heuristic syllable counting.

Counts maximal vowel-letter groups (aeiouy), then subtracts a word-final
silent "e" when it forms its own group and is not the only one. Deterministic;
symbol-only tokens count as zero.
"""

from __future__ import annotations

import re

_VOWEL_GROUP = re.compile(r"[aeiouy]+")


def count_syllables(word: str) -> int:
    w = "".join(c for c in word.lower() if c.isalpha())
    if not w:
        return 0
    groups = _VOWEL_GROUP.findall(w)
    if not groups:
        return 0
    n = len(groups)
    if n > 1 and w.endswith("e") and groups[-1] == "e":
        n -= 1
    return n
