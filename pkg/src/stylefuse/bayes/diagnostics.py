"""Convergence QA for MCMC output: split R-hat and rank-normalized bulk ESS."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

RHAT_FLAG = 1.05


def _split(chains: np.ndarray) -> np.ndarray:
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    c, n = chains.shape
    half = n // 2
    if half < 2:
        raise ValueError("need at least 4 draws per chain to split")
    return np.vstack([chains[:, :half], chains[:, half : 2 * half]])


def split_rhat(chains: np.ndarray) -> float:
    """Potential scale reduction over split chains; NaN for constant input."""
    x = _split(chains)
    m, n = x.shape
    means = x.mean(axis=1)
    variances = x.var(axis=1, ddof=1)
    w = variances.mean()
    if w <= 0.0 or not np.isfinite(w):
        return float("nan")
    b = n * means.var(ddof=1)
    var_hat = (n - 1) / n * w + b / n
    return float(np.sqrt(var_hat / w))


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    ranks = rankdata(x, method="average").reshape(x.shape)
    return ndtri((ranks - 3.0 / 8.0) / (x.size + 0.25))


def _autocov(x: np.ndarray) -> np.ndarray:
    # per-row biased autocovariance via FFT
    m, n = x.shape
    centered = x - x.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(f.conj() * f, size, axis=1)[:, :n].real
    return acov / n


def ess_bulk(chains: np.ndarray) -> float:
    """Effective sample size of rank-normalized split chains (Geyer pairing)."""
    x = _split(chains)
    x = _rank_normalize(x)
    m, n = x.shape
    if np.allclose(x.var(axis=1), 0.0):
        return float("nan")
    acov = _autocov(x)
    mean_var = float(acov[:, 0].mean()) * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return float("nan")

    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - float(acov[:, 1].mean())) / var_plus
    rho[1] = rho_odd
    t = 1
    while t < n - 3 and (rho_even + rho_odd) > 0.0:
        rho_even = 1.0 - (mean_var - float(acov[:, t + 1].mean())) / var_plus
        rho_odd = 1.0 - (mean_var - float(acov[:, t + 2].mean())) / var_plus
        if (rho_even + rho_odd) >= 0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0:
        rho[max_t + 1] = rho_even
    tau = -1.0 + 2.0 * float(rho[: max_t + 2].sum())
    tau = max(tau, 1.0 / np.log10(m * n))
    return float(m * n / tau)


def diagnostics(draws: np.ndarray, divergences: int = 0) -> dict:
    """Per-scalar split R-hat and bulk ESS for draws shaped (chains, samples, dim).

    Scalars whose R-hat exceeds 1.05 (or is undefined) are listed in 'flagged'.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 2:
        draws = draws[None, :, :]
    c, n, dim = draws.shape
    if c < 2 and n < 100:
        raise ValueError("need at least 2 chains or 100 draws")
    rhat = np.array([split_rhat(draws[:, :, k]) for k in range(dim)])
    ess = np.array([ess_bulk(draws[:, :, k]) for k in range(dim)])
    flagged = [int(k) for k in range(dim) if not np.isfinite(rhat[k]) or rhat[k] > RHAT_FLAG]
    return {
        "rhat": rhat,
        "ess": ess,
        "divergences": int(divergences),
        "flagged": flagged,
    }
