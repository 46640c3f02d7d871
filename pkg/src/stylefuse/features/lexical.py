"""Lexical richness statistics: type-token ratio, Honore statistic, Brunet index."""

from __future__ import annotations

import math
from collections import Counter


def lexical_diversity(tokens: list[str]) -> dict[str, float | None]:
    """ttr = V/N; honore = 100 ln N / (1 - V1/V); brunet = N^(V^-0.165).

    N is the token count, V the type count, V1 the hapax count (all on
    lowercased tokens). Honore is None when every type is a hapax.
    """
    if not tokens:
        raise ValueError("lexical_diversity requires at least one token")
    counts = Counter(t.lower() for t in tokens)
    n = len(tokens)
    v = len(counts)
    v1 = sum(1 for c in counts.values() if c == 1)

    honore: float | None
    if v1 == v:
        honore = None
    else:
        honore = 100.0 * math.log(n) / (1.0 - v1 / v)
    return {
        "ttr": v / n,
        "honore": honore,
        "brunet": n ** (v ** -0.165),
    }
