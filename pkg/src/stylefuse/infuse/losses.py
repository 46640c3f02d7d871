"""Training losses: reconstruction, discriminator-driven, and combinations.

The discriminator score of a sampled sequence has no gradient path into the
generator, so the discriminator losses are trained through their score-function
(policy-gradient) estimator while being reported exactly as defined.
"""

from dataclasses import dataclass

import numpy as np

from .model import BaselineHead, InfusionError, ToyLM, sequence_log_probs


@dataclass
class TrainingPair:
    """One styled/non-styled exemplar pair sharing a prompt."""

    prompt: list[str]
    y_s_star: list[str]
    y_ns_star: list[str]

    def __post_init__(self):
        from .model import EOS

        for name, seq in (("y_s_star", self.y_s_star), ("y_ns_star", self.y_ns_star)):
            if not seq:
                raise InfusionError(f"{name} must be nonempty")
            if seq[-1] != EOS:
                raise InfusionError(f"{name} must end with the end token")


def reconstruction_loss(lm: ToyLM, pair: TrainingPair) -> float:
    """Mean negative log likelihood of the styled sequence."""
    logps = sequence_log_probs(lm, pair.y_s_star, pair.prompt)
    return float(-np.mean(logps))


def nll_row_grads(lm: ToyLM, tokens: list[str], prompt: list[str]) -> dict[tuple[str, ...], np.ndarray]:
    """Gradient of the mean NLL with respect to each context's logit row."""
    if not tokens:
        raise InfusionError("empty sequence")
    grads: dict[tuple[str, ...], np.ndarray] = {}
    prefix = list(prompt)
    n = len(tokens)
    for tok in tokens:
        lm.check_token(tok)
        ctx = lm.context_of(prefix)
        probs = np.exp(lm.log_probs_for(ctx))
        row = grads.setdefault(ctx, np.zeros(len(lm.vocabulary)))
        row += probs / n
        row[lm.index[tok]] -= 1.0 / n
        prefix.append(tok)
    return grads


def discriminator_loss(discriminator, pair: TrainingPair, generated: list[str], baselines: np.ndarray, lm: ToyLM) -> float:
    """D(styled, generated) minus the baseline-weighted mean log probability."""
    if len(generated) == 0:
        raise InfusionError("empty generated sequence")
    logps = sequence_log_probs(lm, generated, pair.prompt)
    if len(baselines) != len(generated):
        raise InfusionError("one baseline value per generated token required")
    score = float(discriminator(pair.y_s_star, generated))
    return score - float(np.mean(np.asarray(baselines) * logps))


def policy_gradient_rows(
    lm: ToyLM,
    contexts: list[tuple[str, ...]],
    tokens: list[str],
    coefficients: np.ndarray,
) -> dict[tuple[str, ...], np.ndarray]:
    """Sum of coeff_i * d(-log p(tok_i))/d(row): the score-function estimator.

    With coefficients (baseline_i - R) the accumulated rows are an unbiased
    estimate of the gradient of E[R], so a descent step along them lowers the
    expected reward; any constant baseline leaves the expectation unchanged.
    """
    grads: dict[tuple[str, ...], np.ndarray] = {}
    for ctx, tok, coeff in zip(contexts, tokens, coefficients, strict=True):
        probs = np.exp(lm.log_probs_for(ctx))
        row = grads.setdefault(ctx, np.zeros(len(lm.vocabulary)))
        row += coeff * probs
        row[lm.index[tok]] -= coeff
    return grads


def supervised_loss(discriminator, pair: TrainingPair, generated: list[str]) -> float:
    """Mean discriminator score over all prefixes of the generated sequence."""
    if len(generated) == 0:
        raise InfusionError("empty generated sequence")
    scores = [float(discriminator(pair.y_s_star, generated[: i + 1])) for i in range(len(generated))]
    return float(np.mean(scores))


def prefix_scores(discriminator, pair: TrainingPair, generated: list[str]) -> np.ndarray:
    return np.array([float(discriminator(pair.y_s_star, generated[: i + 1])) for i in range(len(generated))])


def combined_loss(l_d: float, l_r: float, beta: float, alpha_s: float) -> tuple[float, float]:
    """Returns (C, L) with C = beta*(1 - alpha_s) and L = C*L_D + (1-C)*L_R."""
    if not (0.0 <= beta <= 1.0):
        raise InfusionError("beta must lie in [0,1]")
    if not (0.0 <= alpha_s <= 1.0):
        raise InfusionError("alpha_s must lie in [0,1]")
    c = beta * (1.0 - alpha_s)
    return c, c * l_d + (1.0 - c) * l_r


def baseline_loss(head: BaselineHead, states: np.ndarray, reward: float) -> float:
    """Mean squared gap between the reward and the head's predictions."""
    preds = head.predict(states)
    return float(np.mean((reward - preds) ** 2))


def baseline_grads(head: BaselineHead, states: np.ndarray, reward: float) -> tuple[np.ndarray, float]:
    states = np.asarray(states)
    resid = reward - head.predict(states)
    grad_w = -2.0 * (states.T @ resid) / len(resid)
    grad_b = float(-2.0 * np.mean(resid))
    return grad_w, grad_b


def baseline_update(head: BaselineHead, states: np.ndarray, reward: float, lr: float) -> float:
    """One gradient step on the squared error; returns the pre-step loss."""
    loss = baseline_loss(head, states, reward)
    grad_w, grad_b = baseline_grads(head, states, reward)
    head.w = head.w - lr * grad_w
    head.b = head.b - lr * grad_b
    return loss
