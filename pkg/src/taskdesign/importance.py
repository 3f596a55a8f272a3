"""Variance of the importance-sampled ATE estimator and its optimal proposal.

Draw ``(b, t)`` from a proposal ``h`` and score ``sign(t) p(b) y / h(b, t)``;
the mean over ``n`` draws is unbiased for the ATE.
"""

from __future__ import annotations

import numpy as np

SIGN = np.array([-1.0, 1.0])


def _check(h, density, m2):
    h = np.asarray(h, dtype=float)
    density = np.asarray(density, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    k = density.shape[0]
    if h.shape != (k, 2) or m2.shape != (k, 2):
        raise ValueError(f"proposal and second moments must have shape ({k}, 2)")
    if np.any(h < 0) or np.any(density < 0):
        raise ValueError("proposal and density must be nonnegative")
    return h, density, m2


def is_ate_variance(h, density, m2, n: int, ate: float) -> float:
    """Variance of the mean of ``n`` importance-weighted draws."""
    h, density, m2 = _check(h, density, m2)
    if n < 1:
        raise ValueError("n must be >= 1")
    live = density > 0
    if np.any(h[live] <= 0):
        raise ValueError("proposal must be positive wherever the density is")
    ratio = (density[live] ** 2)[:, None] * m2[live] / h[live]
    return float((ratio.sum() - ate * ate) / n)


def optimal_proposal(density, m2) -> np.ndarray:
    """Variance-minimising proposal, proportional to ``p(b) sqrt(m2(b, t))``."""
    density = np.asarray(density, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    if m2.shape != (density.shape[0], 2):
        raise ValueError("second moments must have one row per bin")
    if np.any(m2 < 0):
        raise ValueError("second moments must be nonnegative")
    h = density[:, None] * np.sqrt(m2)
    z = h.sum()
    if z <= 0:
        raise ValueError("second moments vanish on the support")
    return h / z


def rct_proposal(density) -> np.ndarray:
    density = np.asarray(density, dtype=float)
    return np.repeat(density[:, None] / (2.0 * density.sum()), 2, axis=1)


def simulate_is_ate(h, density, theta, n: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo replicates of the importance-sampled ATE estimate with Bernoulli outcomes."""
    h, density, theta = _check(h, density, theta)
    flat = h.ravel() / h.sum()
    k = density.shape[0]
    counts = rng.multinomial(n, flat, size=reps)
    succ = rng.binomial(counts, np.broadcast_to(theta.ravel(), counts.shape))
    weight = np.zeros(2 * k)
    pos = flat > 0
    weight[pos] = (np.repeat(density, 2) * np.tile(SIGN, k))[pos] / flat[pos]
    return succ @ weight / n
