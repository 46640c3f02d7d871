"""Small learnable autoregressive language model over a closed vocabulary.

A context-conditioned categorical table stands in for a neural generator.
Every probability, gradient, and search step is exactly enumerable, which is
the point: the training losses layered on top stay fully checkable.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BOS = "<s>"
EOS = "</s>"
STATE_DIM = 8


class InfusionError(ValueError):
    pass


def _context_rng(seed: int, context: tuple[str, ...]) -> np.random.Generator:
    digest = hashlib.blake2b("\x1f".join(context).encode(), digest_size=8).digest()
    return np.random.default_rng([seed, int.from_bytes(digest, "big")])


@dataclass
class ToyLM:
    """Order-m categorical model; BOS is structural and never generated."""

    vocabulary: list[str]
    order: int
    state_seed: int = 0
    d_s: int = STATE_DIM
    logits: dict[tuple[str, ...], np.ndarray] = field(default_factory=dict)
    _states: dict[tuple[str, ...], np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.order not in (1, 2):
            raise InfusionError("context order must be 1 or 2")
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise InfusionError("vocabulary has duplicates")
        if BOS not in self.vocabulary or EOS not in self.vocabulary:
            raise InfusionError("vocabulary must include the boundary tokens")
        if len(self.vocabulary) < 3:
            raise InfusionError("vocabulary needs at least one regular token")
        self.index = {t: i for i, t in enumerate(self.vocabulary)}
        self._bos_id = self.index[BOS]
        for ctx, row in self.logits.items():
            self.logits[ctx] = np.asarray(row, dtype=float)
            if self.logits[ctx].shape != (len(self.vocabulary),) or not np.all(np.isfinite(self.logits[ctx])):
                raise InfusionError(f"bad logit row for context {ctx!r}")

    def row(self, context: tuple[str, ...]) -> np.ndarray:
        if context not in self.logits:
            self.logits[context] = np.zeros(len(self.vocabulary))
        return self.logits[context]

    def log_probs_for(self, context: tuple[str, ...]) -> np.ndarray:
        """Log next-token distribution; BOS is masked out of the support."""
        row = self.row(context).copy()
        row[self._bos_id] = -np.inf
        row -= row.max()
        return row - np.log(np.sum(np.exp(row)))

    def context_of(self, prefix: list[str]) -> tuple[str, ...]:
        padded = [BOS] * self.order + list(prefix)
        return tuple(padded[-self.order :])

    def state(self, context: tuple[str, ...]) -> np.ndarray:
        """Fixed per-context embedding consumed by the baseline head."""
        if context not in self._states:
            rng = _context_rng(self.state_seed, context)
            self._states[context] = rng.normal(scale=0.5, size=self.d_s)
        return self._states[context]

    def check_token(self, token: str) -> None:
        if token not in self.index:
            raise InfusionError(f"token {token!r} not in vocabulary")
        if token == BOS:
            raise InfusionError("sequences may not contain the start token")


def new_lm(regular_tokens: list[str], order: int = 1, seed: int = 0) -> ToyLM:
    vocab = [BOS, EOS] + [t for t in regular_tokens if t not in (BOS, EOS)]
    return ToyLM(vocabulary=vocab, order=order, state_seed=seed)


def sequence_log_probs(lm: ToyLM, tokens: list[str], prompt: list[str] = ()) -> np.ndarray:
    """Teacher-forced per-token log probabilities of `tokens` after `prompt`."""
    for t in list(prompt):
        if t not in lm.index:
            raise InfusionError(f"prompt token {t!r} not in vocabulary")
    out = np.empty(len(tokens))
    prefix = list(prompt)
    for i, tok in enumerate(tokens):
        lm.check_token(tok)
        ctx = lm.context_of(prefix)
        out[i] = lm.log_probs_for(ctx)[lm.index[tok]]
        prefix.append(tok)
    return out


@dataclass
class SampleResult:
    tokens: list[str]
    log_probs: np.ndarray
    contexts: list[tuple[str, ...]]
    terminated: bool


def sample_sequence(lm: ToyLM, prompt: list[str], rng: np.random.Generator, max_tokens: int = 100) -> SampleResult:
    tokens: list[str] = []
    logps: list[float] = []
    contexts: list[tuple[str, ...]] = []
    prefix = list(prompt)
    terminated = False
    for _ in range(max_tokens):
        ctx = lm.context_of(prefix)
        logp = lm.log_probs_for(ctx)
        tok_id = int(rng.choice(len(lm.vocabulary), p=np.exp(logp)))
        tok = lm.vocabulary[tok_id]
        contexts.append(ctx)
        tokens.append(tok)
        logps.append(float(logp[tok_id]))
        prefix.append(tok)
        if tok == EOS:
            terminated = True
            break
    return SampleResult(tokens=tokens, log_probs=np.array(logps), contexts=contexts, terminated=terminated)


def beam_generate(lm: ToyLM, prompt: list[str], width: int = 4, max_tokens: int = 100) -> list[str]:
    """Beam search over length-normalized total log probability."""
    if width < 1:
        raise InfusionError("beam width must be at least 1")
    frontier: list[tuple[list[str], float]] = [([], 0.0)]
    finished: list[tuple[list[str], float]] = []

    def norm(entry: tuple[list[str], float]) -> float:
        toks, total = entry
        return total / max(len(toks), 1)

    for _ in range(max_tokens):
        candidates: list[tuple[list[str], float]] = []
        for toks, total in frontier:
            ctx = lm.context_of(list(prompt) + toks)
            logp = lm.log_probs_for(ctx)
            for tok_id, lp in enumerate(logp):
                if not np.isfinite(lp):
                    continue
                candidates.append((toks + [lm.vocabulary[tok_id]], total + float(lp)))
        candidates.sort(key=lambda e: (-norm(e), e[0]))
        frontier = []
        for toks, total in candidates[: width]:
            if toks[-1] == EOS:
                finished.append((toks, total))
            else:
                frontier.append((toks, total))
        if not frontier:
            break
    pool = finished + frontier
    pool.sort(key=lambda e: (-norm(e), e[0]))
    return pool[0][0]


def truncate_repeats(tokens: list[str], window: int = 4) -> list[str]:
    """Cut at the first immediately repeated window of the given size."""
    for i in range(len(tokens) - 2 * window + 1):
        if tokens[i : i + window] == tokens[i + window : i + 2 * window]:
            return tokens[: i + window]
    return list(tokens)


def postprocess(text: str) -> str:
    return " ".join(truncate_repeats(text.split()))


@dataclass
class BaselineHead:
    """Linear reward predictor over the model's context embeddings."""

    w: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.b)):
            raise InfusionError("baseline head parameters must be finite")

    def predict(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(states) @ self.w + self.b


def new_head(d_s: int = STATE_DIM) -> BaselineHead:
    return BaselineHead(w=np.zeros(d_s), b=0.0)


def _ctx_key(context: tuple[str, ...]) -> str:
    return json.dumps(list(context))


def save_lm(lm: ToyLM, head: BaselineHead, path) -> None:
    payload = {
        "vocabulary": lm.vocabulary,
        "order": lm.order,
        "state_seed": lm.state_seed,
        "d_s": lm.d_s,
        "logits": {_ctx_key(c): r.tolist() for c, r in sorted(lm.logits.items())},
        "states": {_ctx_key(c): s.tolist() for c, s in sorted(lm._states.items())},
        "head": {"w": head.w.tolist(), "b": head.b},
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_lm(path) -> tuple[ToyLM, BaselineHead]:
    payload = json.loads(Path(path).read_text())
    lm = ToyLM(
        vocabulary=list(payload["vocabulary"]),
        order=int(payload["order"]),
        state_seed=int(payload["state_seed"]),
        d_s=int(payload["d_s"]),
        logits={tuple(json.loads(k)): np.array(v) for k, v in payload["logits"].items()},
    )
    lm._states = {tuple(json.loads(k)): np.array(v) for k, v in payload["states"].items()}
    head = BaselineHead(w=np.array(payload["head"]["w"]), b=float(payload["head"]["b"]))
    return lm, head
