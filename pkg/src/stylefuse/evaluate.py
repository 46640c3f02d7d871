"""Generation evaluation: ROUGE overlap, feature-shift tests, agreement.

Shift significance is a per-feature Welch test between the feature matrices
of two generation sets; direction correctness compares the observed shift
against the sign of the fitted preference slope for that feature.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from stylefuse.bayes.correlation import CorrelationResult
from stylefuse.corpus import word_tokens
from stylefuse.features.registry import FeatureMatrix

BUCKETS = ("p<0.0001", "p<0.001", "p<0.01", "p<0.05", "ns")
_THRESHOLDS = (1e-4, 1e-3, 1e-2, 5e-2)


class EvaluationError(ValueError):
    pass


def rouge_tokens(text: str) -> list[str]:
    return [t.lower() for t in word_tokens(text)]


@dataclass(frozen=True)
class RougeComponent:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


@dataclass(frozen=True)
class RougeScores:
    rouge1: RougeComponent
    rouge2: RougeComponent
    rougeL: RougeComponent


def _component(overlap: int, n_hyp: int, n_ref: int) -> RougeComponent:
    if n_hyp == 0 or n_ref == 0:
        return RougeComponent(0.0, 0.0, 0.0, degenerate=True)
    precision = overlap / n_hyp
    recall = overlap / n_ref
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return RougeComponent(precision, recall, f1)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(reference: list[str], hypothesis: list[str], n: int) -> RougeComponent:
    """Clipped n-gram overlap between a reference and a hypothesis."""
    if n < 1:
        raise EvaluationError("n must be at least 1")
    ref_grams = _ngrams(reference, n)
    hyp_grams = _ngrams(hypothesis, n)
    overlap = sum(min(count, ref_grams[g]) for g, count in hyp_grams.items())
    return _component(overlap, sum(hyp_grams.values()), sum(ref_grams.values()))


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(reference: list[str], hypothesis: list[str]) -> RougeComponent:
    """Longest-common-subsequence overlap."""
    return _component(_lcs_length(reference, hypothesis), len(hypothesis), len(reference))


def rouge_scores(reference: str, hypothesis: str) -> RougeScores:
    ref = rouge_tokens(reference)
    hyp = rouge_tokens(hypothesis)
    return RougeScores(
        rouge1=rouge_n(ref, hyp, 1),
        rouge2=rouge_n(ref, hyp, 2),
        rougeL=rouge_l(ref, hyp),
    )


@dataclass(frozen=True)
class WelchResult:
    t: float
    p: float
    df: float
    degenerate: bool = False


def welch_t_test(sample_a, sample_b) -> WelchResult:
    """Unequal-variance t statistic with Welch-Satterthwaite df."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise EvaluationError("each sample needs at least 2 values")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise EvaluationError("samples must be finite")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    gap = a.mean() - b.mean()
    if va == 0.0 and vb == 0.0:
        if gap == 0.0:
            return WelchResult(0.0, 1.0, float(len(a) + len(b) - 2), degenerate=True)
        return WelchResult(np.sign(gap) * np.inf, 0.0, float(len(a) + len(b) - 2), degenerate=True)
    sa, sb = va / len(a), vb / len(b)
    se2 = sa + sb
    t = gap / np.sqrt(se2)
    df = se2**2 / (sa**2 / (len(a) - 1) + sb**2 / (len(b) - 1))
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return WelchResult(float(t), p, float(df))


def significance_bucket(p: float) -> str:
    for label, cut in zip(BUCKETS, _THRESHOLDS):
        if p < cut:
            return label
    return "ns"


@dataclass(frozen=True)
class SignificanceRow:
    feature: str
    baseline_mean: float
    model_mean: float
    t: float
    p: float
    df: float
    bucket: str
    gamma_mean: float
    direction_correct: bool | None  # None when the slope interval covers 0


@dataclass
class SignificanceReport:
    rows: list[SignificanceRow]

    def row(self, feature: str) -> SignificanceRow:
        for r in self.rows:
            if r.feature == feature:
                return r
        raise KeyError(feature)


def _finite_column(matrix: FeatureMatrix, feature: str) -> np.ndarray:
    if feature not in matrix.names:
        raise EvaluationError(f"feature {feature!r} missing from matrix")
    col = matrix.column(feature)
    return col[np.isfinite(col)]


def significance_report(
    baseline: FeatureMatrix,
    model: FeatureMatrix,
    correlations: list[CorrelationResult],
) -> SignificanceReport:
    """Per-feature Welch tests of model generations against a baseline set."""
    if list(baseline.names) != list(model.names):
        raise EvaluationError("matrices must share one feature registry")
    rows = []
    for corr in correlations:
        base_col = _finite_column(baseline, corr.feature)
        model_col = _finite_column(model, corr.feature)
        if len(base_col) < 2 or len(model_col) < 2:
            raise EvaluationError(f"feature {corr.feature!r} has fewer than 2 observations")
        welch = welch_t_test(base_col, model_col)
        shift = float(model_col.mean() - base_col.mean())
        if corr.interval_excludes_zero() and shift != 0.0:
            direction = (shift > 0) == (corr.pooled_mean > 0)
        else:
            direction = None
        rows.append(
            SignificanceRow(
                feature=corr.feature,
                baseline_mean=float(base_col.mean()),
                model_mean=float(model_col.mean()),
                t=welch.t,
                p=welch.p,
                df=welch.df,
                bucket=significance_bucket(welch.p),
                gamma_mean=corr.pooled_mean,
                direction_correct=direction,
            )
        )
    return SignificanceReport(rows=rows)


def agreement_score(report: SignificanceReport, correlations: list[CorrelationResult]) -> float:
    """Slope-weighted percent of features moved the preferred way.

    Full credit needs a significant shift in the right direction, half credit
    a non-significant one; features whose slope interval covers 0 are out.
    """
    weights = {c.feature: abs(c.pooled_mean) for c in correlations if c.interval_excludes_zero()}
    total, score = 0.0, 0.0
    for row in report.rows:
        if row.feature not in weights or row.direction_correct is None:
            continue
        w = weights[row.feature]
        total += w
        if row.direction_correct:
            score += w * (1.0 if row.p < 0.05 else 0.5)
    if total == 0.0:
        raise EvaluationError("no features with a decisive slope to score")
    return 100.0 * score / total


def load_external_scores(path) -> dict[str, float]:
    """Externally computed metric values (e.g. model-based similarity scores).

    Rows are `<label>\\t<value>`; values must be finite numbers.
    """
    out: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise EvaluationError(f"{path}:{lineno}: expected `label<TAB>value`")
            label, value = parts
            try:
                number = float(value)
            except ValueError:
                raise EvaluationError(f"{path}:{lineno}: {value!r} is not a number") from None
            if not np.isfinite(number):
                raise EvaluationError(f"{path}:{lineno}: value must be finite")
            if label in out:
                raise EvaluationError(f"{path}:{lineno}: duplicate label {label!r}")
            out[label] = number
    return out


def significance_to_csv(report: SignificanceReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["feature", "baseline_mean", "model_mean", "t", "p", "df", "bucket", "gamma_mean", "direction"]
        )
        for r in report.rows:
            mark = "" if r.direction_correct is None else ("correct" if r.direction_correct else "incorrect")
            writer.writerow(
                [r.feature, repr(r.baseline_mean), repr(r.model_mean), repr(r.t), repr(r.p), repr(r.df), r.bucket, repr(r.gamma_mean), mark]
            )


def significance_to_markdown(report: SignificanceReport) -> str:
    lines = [
        "| feature | baseline | model | p | direction |",
        "| --- | --- | --- | --- | --- |",
    ]
    for r in report.rows:
        mark = "" if r.direction_correct is None else ("yes" if r.direction_correct else "no")
        lines.append(
            f"| {r.feature} | {r.baseline_mean:.4g} | {r.model_mean:.4g} | {r.bucket} | {mark} |"
        )
    return "\n".join(lines) + "\n"


def rouge_to_csv(scores: dict[str, RougeScores], path, external: dict[str, float] | None = None) -> None:
    """One row per labeled generation set, Table-style columns."""
    external = external or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["label", "rouge1_f1", "rouge2_f1", "rougeL_f1", "rouge1_p", "rouge1_r", "external"]
        )
        for label, s in scores.items():
            ext = external.get(label)
            writer.writerow(
                [
                    label,
                    repr(s.rouge1.f1),
                    repr(s.rouge2.f1),
                    repr(s.rougeL.f1),
                    repr(s.rouge1.precision),
                    repr(s.rouge1.recall),
                    "" if ext is None else repr(ext),
                ]
            )


def mean_rouge(pairs: list[tuple[str, str]]) -> RougeScores:
    """Average component-wise over (reference, hypothesis) text pairs."""
    if not pairs:
        raise EvaluationError("no text pairs to score")
    scored = [rouge_scores(ref, hyp) for ref, hyp in pairs]

    def avg(pick) -> RougeComponent:
        comps = [pick(s) for s in scored]
        return RougeComponent(
            precision=float(np.mean([c.precision for c in comps])),
            recall=float(np.mean([c.recall for c in comps])),
            f1=float(np.mean([c.f1 for c in comps])),
            degenerate=any(c.degenerate for c in comps),
        )

    return RougeScores(
        rouge1=avg(lambda s: s.rouge1),
        rouge2=avg(lambda s: s.rouge2),
        rougeL=avg(lambda s: s.rougeL),
    )
