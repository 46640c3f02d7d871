"""No-U-Turn sampler with multinomial trajectory sampling.

Warmup runs in two windows. The first half adapts step size under an
identity mass matrix; at the midpoint an interim diagonal mass is taken
from the first-window draws and step-size adaptation restarts; the final
mass matrix is estimated from the second half of warmup, which is the
one used (with the averaged step size) for sampling. Each chain is fully
determined by (seed, chain index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIVERGENCE_THRESHOLD = 1000.0

# dual-averaging constants
DA_GAMMA = 0.05
DA_T0 = 10.0
DA_KAPPA = 0.75


class SamplerError(RuntimeError):
    pass


@dataclass
class NutsConfig:
    warmup: int = 1000
    samples: int = 1000
    target_accept: float = 0.8
    max_depth: int = 10
    seed: int = 0
    chains: int = 4
    step_size: float | None = None  # fixed when given; adapted when None


@dataclass
class NutsResult:
    draws: np.ndarray          # (chains, samples, dim)
    divergences: np.ndarray    # per chain, sampling phase
    step_sizes: np.ndarray
    mass_diag: np.ndarray      # (chains, dim)
    accept_rate: np.ndarray

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    def flat(self) -> np.ndarray:
        return self.draws.reshape(-1, self.draws.shape[2])


@dataclass
class _Tree:
    theta_minus: np.ndarray
    r_minus: np.ndarray
    grad_minus: np.ndarray
    theta_plus: np.ndarray
    r_plus: np.ndarray
    grad_plus: np.ndarray
    proposal: np.ndarray
    proposal_logp: float
    proposal_grad: np.ndarray
    logw: float
    stop: bool
    divergent: bool


@dataclass
class _AcceptStats:
    alpha_sum: float = 0.0
    count: int = 0


def leapfrog(theta, r, grad, eps, mass, logp_and_grad):
    """One leapfrog step; eps carries the direction sign. Returns the new state."""
    r_half = r + 0.5 * eps * grad
    theta1 = theta + eps * r_half / mass
    logp1, grad1 = logp_and_grad(theta1)
    r1 = r_half + 0.5 * eps * grad1
    return theta1, r1, grad1, logp1


def _kinetic(r: np.ndarray, mass: np.ndarray) -> float:
    return 0.5 * float(np.sum(r * r / mass))


def _uturn(theta_minus, r_minus, theta_plus, r_plus, mass) -> bool:
    dtheta = theta_plus - theta_minus
    return float(dtheta @ (r_minus / mass)) < 0 or float(dtheta @ (r_plus / mass)) < 0


def _build(state, v, depth, eps, h0, mass, fused, rng, stats) -> _Tree:
    theta, r, grad = state
    if depth == 0:
        theta1, r1, grad1, logp1 = leapfrog(theta, r, grad, v * eps, mass, fused)
        h1 = -logp1 + _kinetic(r1, mass) if np.isfinite(logp1) else np.inf
        divergent = not np.isfinite(h1) or (h1 - h0) > DIVERGENCE_THRESHOLD
        if not divergent and not np.all(np.isfinite(grad1)):
            raise SamplerError(f"non-finite gradient at theta={theta1!r}")
        logw = h0 - h1 if np.isfinite(h1) else -np.inf
        stats.alpha_sum += float(min(1.0, np.exp(min(logw, 0.0))))
        stats.count += 1
        return _Tree(
            theta1, r1, grad1, theta1, r1, grad1,
            theta1, logp1, grad1, logw, divergent, divergent,
        )

    first = _build(state, v, depth - 1, eps, h0, mass, fused, rng, stats)
    if first.stop:
        return first
    if v > 0:
        seed = (first.theta_plus, first.r_plus, first.grad_plus)
    else:
        seed = (first.theta_minus, first.r_minus, first.grad_minus)
    second = _build(seed, v, depth - 1, eps, h0, mass, fused, rng, stats)

    logw = float(np.logaddexp(first.logw, second.logw))
    if np.isfinite(second.logw) and np.log(rng.uniform()) < second.logw - logw:
        chosen = second
    else:
        chosen = first
    if v > 0:
        tm, rm, gm = first.theta_minus, first.r_minus, first.grad_minus
        tp, rp, gp = second.theta_plus, second.r_plus, second.grad_plus
    else:
        tm, rm, gm = second.theta_minus, second.r_minus, second.grad_minus
        tp, rp, gp = first.theta_plus, first.r_plus, first.grad_plus
    stop = second.stop or _uturn(tm, rm, tp, rp, mass)
    return _Tree(
        tm, rm, gm, tp, rp, gp,
        chosen.proposal, chosen.proposal_logp, chosen.proposal_grad,
        logw, stop, second.divergent,
    )


def _transition(theta, grad, logp, eps, mass, max_depth, fused, rng):
    """One NUTS update. Returns (theta, grad, logp, accept_stat, divergent)."""
    r0 = rng.normal(size=theta.shape) * np.sqrt(mass)
    h0 = -logp + _kinetic(r0, mass)
    stats = _AcceptStats()
    tm, rm, gm = theta, r0, grad
    tp, rp, gp = theta, r0, grad
    proposal, prop_logp, prop_grad = theta, logp, grad
    logw_total = 0.0
    divergent = False
    for depth in range(max_depth):
        v = 1 if rng.uniform() < 0.5 else -1
        state = (tp, rp, gp) if v > 0 else (tm, rm, gm)
        tree = _build(state, v, depth, eps, h0, mass, fused, rng, stats)
        divergent = divergent or tree.divergent
        if tree.stop:
            break
        if np.log(rng.uniform()) < tree.logw - logw_total:
            proposal, prop_logp, prop_grad = tree.proposal, tree.proposal_logp, tree.proposal_grad
        logw_total = float(np.logaddexp(logw_total, tree.logw))
        if v > 0:
            tp, rp, gp = tree.theta_plus, tree.r_plus, tree.grad_plus
        else:
            tm, rm, gm = tree.theta_minus, tree.r_minus, tree.grad_minus
        if _uturn(tm, rm, tp, rp, mass):
            break
    accept = stats.alpha_sum / stats.count if stats.count else 0.0
    return proposal, prop_grad, prop_logp, accept, divergent


def _find_epsilon(theta, grad, logp, mass, fused, rng) -> float:
    eps = 1.0
    r = rng.normal(size=theta.shape) * np.sqrt(mass)
    h0 = -logp + _kinetic(r, mass)

    def h_after(e):
        _, r1, _, lp1 = leapfrog(theta, r, grad, e, mass, fused)
        return -lp1 + _kinetic(r1, mass) if np.isfinite(lp1) else np.inf

    dh = h0 - h_after(eps)
    direction = 1.0 if dh > np.log(0.5) else -1.0
    for _ in range(100):
        eps *= 2.0 ** direction
        dh = h0 - h_after(eps)
        if direction * dh <= direction * np.log(0.5) or not (1e-10 < eps < 1e10):
            break
    return float(np.clip(eps, 1e-10, 1e10))


def _regularized_var(draws: np.ndarray) -> np.ndarray:
    n = draws.shape[0]
    var = draws.var(axis=0, ddof=1)
    reg = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
    return np.maximum(reg, 1e-10)


class _DualAveraging:
    def __init__(self, eps0: float, target: float):
        self.mu = np.log(10.0 * eps0)
        self.target = target
        self.h_bar = 0.0
        self.log_eps = np.log(eps0)
        self.log_eps_bar = np.log(eps0)
        self.m = 0

    def update(self, accept_stat: float) -> float:
        self.m += 1
        frac = 1.0 / (self.m + DA_T0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_stat)
        self.log_eps = self.mu - np.sqrt(self.m) / DA_GAMMA * self.h_bar
        eta = self.m ** -DA_KAPPA
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar
        return float(np.exp(self.log_eps))

    @property
    def averaged(self) -> float:
        return float(np.exp(self.log_eps_bar))


def _run_chain(fused, dim, config: NutsConfig, chain: int):
    rng = np.random.default_rng([config.seed, chain])
    theta = np.zeros(dim)
    logp, grad = fused(theta)
    if not np.isfinite(logp):
        raise ValueError("log density is not finite at the zero initial point")
    if not np.all(np.isfinite(grad)):
        raise SamplerError(f"non-finite gradient at theta={theta!r}")
    mass = np.ones(dim)

    adapt = config.step_size is None
    if adapt:
        eps = _find_epsilon(theta, grad, logp, mass, fused, rng)
    else:
        eps = float(config.step_size)

    w1 = config.warmup // 2
    w2 = config.warmup - w1
    da = _DualAveraging(eps, config.target_accept) if adapt else None

    buf = np.empty((max(w1, 1), dim))
    for i in range(w1):
        theta, grad, logp, accept, _ = _transition(
            theta, grad, logp, eps, mass, config.max_depth, fused, rng
        )
        if da:
            eps = da.update(accept)
        buf[i] = theta
    if w1 >= 10:
        mass = _regularized_var(buf[:w1])
        if adapt:
            eps = _find_epsilon(theta, grad, logp, mass, fused, rng)
            da = _DualAveraging(eps, config.target_accept)

    buf2 = np.empty((max(w2, 1), dim))
    for i in range(w2):
        theta, grad, logp, accept, _ = _transition(
            theta, grad, logp, eps, mass, config.max_depth, fused, rng
        )
        if da:
            eps = da.update(accept)
        buf2[i] = theta
    if w2 >= 10:
        mass = _regularized_var(buf2[:w2])
    if da:
        eps = da.averaged

    draws = np.empty((config.samples, dim))
    divergences = 0
    accept_sum = 0.0
    for i in range(config.samples):
        theta, grad, logp, accept, divergent = _transition(
            theta, grad, logp, eps, mass, config.max_depth, fused, rng
        )
        draws[i] = theta
        divergences += int(divergent)
        accept_sum += accept
    mean_accept = accept_sum / config.samples if config.samples else 0.0
    return draws, divergences, eps, mass, mean_accept


def nuts_sample(
    logp_fn, grad_fn, dim: int, config: NutsConfig | None = None, logp_and_grad=None
) -> NutsResult:
    """Draw from a differentiable log density. Deterministic given config.seed.

    Passing a fused logp_and_grad avoids evaluating the density twice per
    leapfrog step; otherwise the two callables are combined.
    """
    config = config or NutsConfig()
    if dim < 1:
        raise ValueError("dim must be >= 1")
    fused = logp_and_grad if logp_and_grad is not None else (
        lambda th: (logp_fn(th), grad_fn(th))
    )
    all_draws = np.empty((config.chains, config.samples, dim))
    divs = np.zeros(config.chains, dtype=int)
    steps = np.zeros(config.chains)
    masses = np.zeros((config.chains, dim))
    accepts = np.zeros(config.chains)
    for c in range(config.chains):
        draws, d, eps, mass, acc = _run_chain(fused, dim, config, c)
        all_draws[c] = draws
        divs[c] = d
        steps[c] = eps
        masses[c] = mass
        accepts[c] = acc
    return NutsResult(all_draws, divs, steps, masses, accepts)
