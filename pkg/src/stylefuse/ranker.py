"""Pairwise style discriminator over feature vectors.

The model is deliberately simple: a logistic head on the difference of two
feature vectors, with no intercept. That buys exact antisymmetry, which a
pairwise judgment should have, and makes every score explainable by the
per-feature weights. Scores from a stronger external discriminator can be
injected through a score file and take precedence wherever a pair is listed.
"""

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit, log_expit

from .corpus import JudgmentSet
from .features import FeatureMatrix, FeatureVector


class RankerError(ValueError):
    pass


@dataclass
class RankerConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise RankerError("learning_rate must be positive")
        if self.epochs <= 0:
            raise RankerError("epochs must be positive")
        if self.l2 < 0:
            raise RankerError("l2 must be nonnegative")


@dataclass
class Ranker:
    feature_names: list[str]
    weights: np.ndarray
    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.sds = np.asarray(self.sds, dtype=float)
        n = len(self.feature_names)
        if self.weights.shape != (n,):
            raise RankerError(f"weight length {self.weights.shape} does not match {n} features")
        if self.means.shape != (n,) or self.sds.shape != (n,):
            raise RankerError("standardization stats must align with the feature list")


def _vector_values(ranker: Ranker, vec: FeatureVector) -> np.ndarray:
    out = np.empty(len(ranker.feature_names))
    for i, name in enumerate(ranker.feature_names):
        if name not in vec.names:
            raise RankerError(f"feature set mismatch: {name!r} absent from vector {vec.doc_id!r}")
        if vec.is_missing(name):
            raise RankerError(f"feature {name!r} missing for document {vec.doc_id!r}")
        out[i] = vec.get(name)
    return out


def score_pair(ranker: Ranker, feat_a: FeatureVector, feat_b: FeatureVector) -> float:
    """P(a preferred over b); the difference model makes score(a,b)+score(b,a)=1."""
    diff = _vector_values(ranker, feat_a) - _vector_values(ranker, feat_b)
    # Means cancel in the difference; only the scale matters. Constant columns
    # carry NaN stats and are passed through unscaled (their weight is inert).
    scale = np.where(np.isfinite(ranker.sds) & (ranker.sds > 0), ranker.sds, 1.0)
    return float(expit(float(np.dot(ranker.weights, diff / scale))))


def _pair_diffs(judgments: JudgmentSet, matrix: FeatureMatrix) -> np.ndarray:
    idx_of = {did: i for i, did in enumerate(matrix.doc_ids)}
    rows = np.empty((len(judgments), len(matrix.names)))
    for r, j in enumerate(judgments):
        for did in (j.a_id, j.b_id):
            if did not in idx_of:
                raise RankerError(f"judgment {j.pair_id!r}: document {did!r} absent from feature matrix")
        diff = matrix.values[idx_of[j.a_id]] - matrix.values[idx_of[j.b_id]]
        bad = np.flatnonzero(~np.isfinite(diff))
        if bad.size:
            raise RankerError(
                f"judgment {j.pair_id!r}: feature {matrix.names[bad[0]]!r} missing for one side"
            )
        rows[r] = diff
    return rows


def penalized_loss(weights: np.ndarray, diffs: np.ndarray, l2: float) -> float:
    """Mean logistic loss on (diff, win) pairs plus (l2/2)|w|^2."""
    margins = diffs @ weights
    return float(-np.mean(log_expit(margins)) + 0.5 * l2 * float(np.dot(weights, weights)))


def loss_gradient(weights: np.ndarray, diffs: np.ndarray, l2: float) -> np.ndarray:
    margins = diffs @ weights
    return -(diffs.T @ expit(-margins)) / len(diffs) + l2 * weights


def train_ranker(train: JudgmentSet, matrix: FeatureMatrix, config: RankerConfig | None = None) -> Ranker:
    """Full-batch gradient descent from zero weights; deterministic."""
    if config is None:
        config = RankerConfig()
    if not matrix.standardized:
        raise RankerError("feature matrix must be standardized")
    usable = train.non_tied()
    if len(usable) == 0:
        raise RankerError("no non-tied pairs to train on")
    diffs = _pair_diffs(usable, matrix)
    w = np.zeros(len(matrix.names))
    for _ in range(config.epochs):
        w -= config.learning_rate * loss_gradient(w, diffs, config.l2)
    if not np.all(np.isfinite(w)):
        raise RankerError("training diverged; lower the learning rate")
    blank = np.full(len(matrix.names), np.nan)
    return Ranker(
        feature_names=list(matrix.names),
        weights=w,
        means=blank if matrix.means is None else np.asarray(matrix.means, dtype=float),
        sds=blank if matrix.sds is None else np.asarray(matrix.sds, dtype=float),
    )


def _matrix_scores(ranker: Ranker, judgments: JudgmentSet, matrix: FeatureMatrix) -> np.ndarray:
    if list(matrix.names) != ranker.feature_names:
        raise RankerError("feature matrix columns do not match the ranker's feature list")
    diffs = _pair_diffs(judgments, matrix)
    return expit(diffs @ ranker.weights)


def evaluate_holdout(ranker: Ranker, test: JudgmentSet, matrix: FeatureMatrix) -> float:
    """Fraction of non-tied pairs whose annotated winner gets score > 0.5.

    An exact 0.5 counts for the first slot; a nonzero tie rate is reported
    as a warning because it signals a degenerate ranker.
    """
    usable = test.non_tied()
    if len(usable) == 0:
        raise RankerError("no non-tied pairs to evaluate")
    scores = _matrix_scores(ranker, usable, matrix)
    exact_ties = int(np.sum(scores == 0.5))
    if exact_ties:
        warnings.warn(
            f"{exact_ties}/{len(usable)} pairs scored exactly 0.5; tie-break favors the winner slot",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(np.mean(scores >= 0.5))


def cross_validate(
    judgments: JudgmentSet,
    matrix: FeatureMatrix,
    k: int,
    config: RankerConfig | None = None,
) -> list[float]:
    """Topic-stratified k-fold accuracy; ties are excluded throughout."""
    if k < 2:
        raise RankerError("need at least 2 folds")
    usable = judgments.non_tied()
    folds: list[list] = [[] for _ in range(k)]
    by_topic: dict[str, list] = {}
    for j in usable:
        by_topic.setdefault(j.topic, []).append(j)
    slot = 0
    for topic in sorted(by_topic):
        for j in by_topic[topic]:
            folds[slot % k].append(j)
            slot += 1
    for i, fold in enumerate(folds):
        if not fold:
            raise RankerError(f"fold {i} has zero pairs; lower k or add judgments")
    accuracies = []
    for fold in folds:
        rest = [j for f in folds if f is not fold for j in f]
        model = train_ranker(JudgmentSet(rest), matrix, config)
        accuracies.append(evaluate_holdout(model, JudgmentSet(fold), matrix))
    return accuracies


def save_ranker(ranker: Ranker, path) -> None:
    def listify(arr):
        return [None if not math.isfinite(v) else v for v in arr.tolist()]

    payload = {
        "features": ranker.feature_names,
        "weights": ranker.weights.tolist(),
        "means": listify(ranker.means),
        "sds": listify(ranker.sds),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_ranker(path) -> Ranker:
    payload = json.loads(Path(path).read_text())
    def arr(key):
        return np.array([np.nan if v is None else v for v in payload[key]], dtype=float)

    return Ranker(
        feature_names=list(payload["features"]),
        weights=np.asarray(payload["weights"], dtype=float),
        means=arr("means"),
        sds=arr("sds"),
    )


@dataclass
class ScoreTable:
    """External discriminator scores keyed by ordered document pair.

    Listed pairs override the feature model; the reverse orientation is
    served by antisymmetry. Unlisted pairs fall through to the ranker.
    """

    scores: dict[tuple[str, str], float] = field(default_factory=dict)

    def lookup(self, a_id: str, b_id: str) -> float | None:
        if (a_id, b_id) in self.scores:
            return self.scores[(a_id, b_id)]
        if (b_id, a_id) in self.scores:
            return 1.0 - self.scores[(b_id, a_id)]
        return None


def load_scores(path) -> ScoreTable:
    """Parse a `a_id<TAB>b_id<TAB>score` file; scores must lie strictly in (0,1)."""
    table: dict[tuple[str, str], float] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise RankerError(f"{path}:{lineno}: expected 3 tab-separated fields")
        a_id, b_id, raw = parts
        try:
            score = float(raw)
        except ValueError:
            raise RankerError(f"{path}:{lineno}: score {raw!r} is not a number") from None
        if not (0.0 < score < 1.0) or not math.isfinite(score):
            raise RankerError(f"{path}:{lineno}: score {score} outside (0,1)")
        if a_id == b_id:
            raise RankerError(f"{path}:{lineno}: self-pair {a_id!r}")
        key = (a_id, b_id)
        if key in table:
            raise RankerError(f"{path}:{lineno}: duplicate pair {a_id!r},{b_id!r}")
        table[key] = score
    return ScoreTable(table)


def save_scores(table: ScoreTable, path) -> None:
    lines = [f"{a}\t{b}\t{repr(s)}" for (a, b), s in sorted(table.scores.items())]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def scored_probability(
    ranker: Ranker | None,
    table: ScoreTable | None,
    a_id: str,
    b_id: str,
    feat_a: FeatureVector | None = None,
    feat_b: FeatureVector | None = None,
) -> float:
    """Score with file override first, feature model second."""
    if table is not None:
        hit = table.lookup(a_id, b_id)
        if hit is not None:
            return hit
    if ranker is None or feat_a is None or feat_b is None:
        raise RankerError(f"no score available for pair {a_id!r},{b_id!r}")
    return score_pair(ranker, feat_a, feat_b)
