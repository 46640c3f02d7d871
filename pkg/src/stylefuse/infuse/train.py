"""Style-infusion training loop and its artifacts."""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .losses import (
    TrainingPair,
    baseline_update,
    combined_loss,
    discriminator_loss,
    nll_row_grads,
    policy_gradient_rows,
    prefix_scores,
    reconstruction_loss,
    supervised_loss,
)
from .model import (
    BOS,
    EOS,
    BaselineHead,
    InfusionError,
    ToyLM,
    beam_generate,
    new_head,
    postprocess,
    sample_sequence,
    sequence_log_probs,
)

LOSS_MODES = ("SD", "SS", "fixed")


@dataclass
class InfusionConfig:
    loss_mode: str = "SD"
    beta: float = 0.5
    w_d: float = 0.1
    w_r: float = 0.9
    learning_rate: float = 0.05
    baseline_lr: float = 0.05
    epochs: int = 50
    beam_width: int = 4
    max_tokens: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.loss_mode not in LOSS_MODES:
            raise InfusionError(f"loss_mode must be one of {LOSS_MODES}")
        if not (0.0 <= self.beta <= 1.0):
            raise InfusionError("beta must lie in [0,1]")
        if self.loss_mode == "fixed":
            if self.w_d < 0 or self.w_r < 0 or abs(self.w_d + self.w_r - 1.0) > 1e-9:
                raise InfusionError("fixed weights must be nonnegative and sum to 1")
        if self.learning_rate <= 0 or self.baseline_lr <= 0:
            raise InfusionError("learning rates must be positive")
        if self.epochs < 1 or self.beam_width < 1 or self.max_tokens < 1:
            raise InfusionError("epochs, beam_width, and max_tokens must be positive")


@dataclass
class EpochRow:
    epoch: int
    l_r: float
    l_disc: float
    c_mean: float
    l_total: float
    l_br: float


@dataclass
class TrainResult:
    lm: ToyLM
    head: BaselineHead
    curves: list[EpochRow] = field(default_factory=list)


def _check_finite(value: float, epoch: int, pair_idx: int) -> None:
    if not math.isfinite(value):
        raise InfusionError(f"epoch {epoch}, pair {pair_idx}: non-finite loss")


def train(lm: ToyLM, pairs: list[TrainingPair], discriminator, config: InfusionConfig | None = None) -> TrainResult:
    """Per-epoch pass over pairs; one sampled rollout and one update per pair.

    The discriminator scores token sequences: discriminator(styled, candidate)
    is the probability the styled exemplar is preferred.
    """
    if config is None:
        config = InfusionConfig()
    if not pairs:
        raise InfusionError("no training pairs")
    rng = np.random.default_rng(config.seed)
    head = new_head(lm.d_s)
    alpha_cache = [float(discriminator(p.y_s_star, p.y_ns_star)) for p in pairs]
    for a in alpha_cache:
        if not (0.0 <= a <= 1.0):
            raise InfusionError("discriminator returned a score outside [0,1]")
    curves: list[EpochRow] = []
    for epoch in range(config.epochs):
        sums = {"l_r": 0.0, "l_disc": 0.0, "c": 0.0, "total": 0.0, "l_br": 0.0}
        for k, pair in enumerate(pairs):
            sample = sample_sequence(lm, pair.prompt, rng, config.max_tokens)
            states = np.stack([lm.state(c) for c in sample.contexts])
            reward = float(discriminator(pair.y_s_star, sample.tokens))
            baselines = head.predict(states)
            n = len(sample.tokens)

            l_r = reconstruction_loss(lm, pair)
            lr_grads = nll_row_grads(lm, pair.y_s_star, pair.prompt)

            # D(styled, candidate) is the candidate's failure probability, so
            # the discriminator terms are losses to descend: coefficients are
            # (R_hat - R), which under the -log p convention applies the
            # (R - R_hat) grad-log-p estimator of dE[D]/dparams.
            if config.loss_mode == "SS":
                per_step = prefix_scores(discriminator, pair, sample.tokens)
                l_disc = float(np.mean(per_step))
                coeffs = (baselines - per_step) / n
            else:
                l_disc = discriminator_loss(discriminator, pair, sample.tokens, baselines, lm)
                coeffs = (baselines - reward) / n

            if config.loss_mode == "fixed":
                c = config.w_d
                total = config.w_d * l_disc + config.w_r * l_r
            else:
                c, total = combined_loss(l_disc, l_r, config.beta, alpha_cache[k])
            assert 0.0 <= c <= max(config.beta, config.w_d if config.loss_mode == "fixed" else 0.0)
            _check_finite(total, epoch, k)

            pg_grads = policy_gradient_rows(lm, sample.contexts, sample.tokens, coeffs)
            for ctx, row in lr_grads.items():
                step = (1.0 - c) * row if config.loss_mode != "fixed" else config.w_r * row
                lm.row(ctx)[:] = lm.row(ctx) - config.learning_rate * step
            for ctx, row in pg_grads.items():
                lm.row(ctx)[:] = lm.row(ctx) - config.learning_rate * c * row
            l_br = baseline_update(head, states, reward, config.baseline_lr)
            _check_finite(l_br, epoch, k)

            sums["l_r"] += l_r
            sums["l_disc"] += l_disc
            sums["c"] += c
            sums["total"] += total
            sums["l_br"] += l_br
        m = len(pairs)
        curves.append(
            EpochRow(
                epoch=epoch,
                l_r=sums["l_r"] / m,
                l_disc=sums["l_disc"] / m,
                c_mean=sums["c"] / m,
                l_total=sums["total"] / m,
                l_br=sums["l_br"] / m,
            )
        )
    return TrainResult(lm=lm, head=head, curves=curves)


def write_loss_curves(curves: list[EpochRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "l_r", "l_disc", "c_mean", "l_total", "l_br"])
        for row in curves:
            writer.writerow([row.epoch, repr(row.l_r), repr(row.l_disc), repr(row.c_mean), repr(row.l_total), repr(row.l_br)])


def strip_boundaries(tokens: list[str]) -> list[str]:
    return [t for t in tokens if t not in (BOS, EOS)]


def token_discriminator(ranker):
    """Adapt a feature ranker to score raw token sequences.

    Boundary tokens are stripped before feature extraction; an empty
    remainder scores a neutral 0.5.
    """
    from ..features import FeatureVector, features_from_tokens
    from ..ranker import score_pair

    def vector(doc_id: str, tokens: list[str]) -> FeatureVector | None:
        content = strip_boundaries(tokens)
        if not content:
            return None
        native = features_from_tokens([content], text=" ".join(content))
        values = {name: native.get(name) for name in ranker.feature_names}
        return FeatureVector(doc_id=doc_id, names=tuple(ranker.feature_names), values=values)

    def score(styled: list[str], candidate: list[str]) -> float:
        va = vector("styled", styled)
        vb = vector("candidate", candidate)
        if va is None or vb is None:
            return 0.5
        return score_pair(ranker, va, vb)

    return score


def generate_record(lm: ToyLM, prompt: list[str], config: InfusionConfig | None = None) -> dict:
    if config is None:
        config = InfusionConfig()
    tokens = beam_generate(lm, list(prompt), width=config.beam_width, max_tokens=config.max_tokens)
    log_probs = sequence_log_probs(lm, tokens, list(prompt))
    text = postprocess(" ".join(strip_boundaries(tokens)))
    return {
        "prompt": " ".join(strip_boundaries(list(prompt))),
        "text": text,
        "tokens": tokens,
        "log_probs": [float(v) for v in log_probs],
    }


def write_generations(records: list[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
