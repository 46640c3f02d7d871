"""Geometry of embedding trajectories: speed, volume, circuitousness."""

from __future__ import annotations

from itertools import permutations
from typing import NamedTuple

import numpy as np

from stylefuse.corpus import EmbeddingSequence

EXACT_LIMIT = 12
VOLUME_EPS = 1e-8


class PathResult(NamedTuple):
    length: float
    exact: bool


def _pairwise(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def _held_karp(dist: np.ndarray) -> float:
    # free endpoints: min over all start/end pairs
    n = dist.shape[0]
    full = (1 << n) - 1
    inf = np.inf
    dp = np.full((1 << n, n), inf)
    for i in range(n):
        dp[1 << i, i] = 0.0
    for mask in range(1, full + 1):
        row = dp[mask]
        for last in range(n):
            cost = row[last]
            if not np.isfinite(cost) or not mask & (1 << last):
                continue
            for nxt in range(n):
                if mask & (1 << nxt):
                    continue
                cand = cost + dist[last, nxt]
                nm = mask | (1 << nxt)
                if cand < dp[nm, nxt]:
                    dp[nm, nxt] = cand
    return float(dp[full].min())


def _path_length(order: list[int], dist: np.ndarray) -> float:
    return float(sum(dist[order[k], order[k + 1]] for k in range(len(order) - 1)))


def _nearest_neighbor(dist: np.ndarray, start: int) -> list[int]:
    n = dist.shape[0]
    seen = np.zeros(n, dtype=bool)
    order = [start]
    seen[start] = True
    for _ in range(n - 1):
        row = dist[order[-1]].copy()
        row[seen] = np.inf
        nxt = int(row.argmin())
        order.append(nxt)
        seen[nxt] = True
    return order


def _two_opt(order: list[int], dist: np.ndarray, max_passes: int = 20) -> list[int]:
    # path variant: reversing order[i:j+1] touches at most two boundary edges
    n = len(order)
    order = list(order)
    for _ in range(max_passes):
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                before = 0.0
                after = 0.0
                if i > 0:
                    before += dist[order[i - 1], order[i]]
                    after += dist[order[i - 1], order[j]]
                if j < n - 1:
                    before += dist[order[j], order[j + 1]]
                    after += dist[order[i], order[j + 1]]
                if after < before - 1e-12:
                    order[i : j + 1] = reversed(order[i : j + 1])
                    improved = True
        if not improved:
            break
    return order


def shortest_hamiltonian_path(points: np.ndarray) -> PathResult:
    """Length of the shortest path visiting every point once, endpoints free.

    Exact dynamic program up to 12 points; nearest-neighbor starts plus 2-opt
    beyond that, with the result flagged approximate.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    dist = _pairwise(points)
    if n <= EXACT_LIMIT:
        return PathResult(_held_karp(dist), True)
    starts = sorted({0, n - 1, *(int(k) for k in np.linspace(0, n - 1, 6))})
    candidates = [list(range(n))]
    candidates += [_nearest_neighbor(dist, s) for s in starts]
    best = min(candidates, key=lambda o: _path_length(o, dist))
    best = _two_opt(best, dist)
    return PathResult(_path_length(best, dist), False)


def brute_force_path(points: np.ndarray) -> float:
    """Exhaustive oracle, only sensible for tiny n."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    dist = _pairwise(points)
    return min(_path_length(list(p), dist) for p in permutations(range(n)))


def trajectory_features(seq: EmbeddingSequence) -> dict[str, float | None]:
    """Speed, volume, and circuitousness of one embedding sequence.

    Circuitousness needs at least 3 vectors and is reported missing below
    that. A single vector yields zero speed and volume.
    """
    vecs = np.asarray(seq.vectors, dtype=float)
    n = vecs.shape[0]
    if n == 0:
        raise ValueError("empty embedding sequence")

    out: dict[str, float | None] = {}
    if n == 1:
        out["speed"] = 0.0
        out["volume"] = 0.0
        out["circuitousness"] = None
        return out

    steps = np.linalg.norm(np.diff(vecs, axis=0), axis=1)
    in_order = float(steps.sum())
    out["speed"] = in_order / n

    d_sub = min(5, n - 1, vecs.shape[1])
    cov = np.cov(vecs, rowvar=False)
    cov = np.atleast_2d(cov)
    eigvals = np.sort(np.linalg.eigvalsh(cov))[::-1][:d_sub]
    out["volume"] = float(np.sqrt(np.prod(np.maximum(eigvals, 0.0) + VOLUME_EPS)))

    if n < 3:
        out["circuitousness"] = None
        return out
    shortest = shortest_hamiltonian_path(vecs)
    # the identity order is itself a Hamiltonian path, so an approximate
    # solve can never be allowed to exceed it
    denom = min(shortest.length, in_order) if not shortest.exact else shortest.length
    if denom <= 0.0:
        out["circuitousness"] = 1.0
    else:
        out["circuitousness"] = in_order / denom
    return out
