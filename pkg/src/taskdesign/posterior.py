"""Beta-Bernoulli posterior over per-(bin, arm) outcome probabilities.

All tables are ``(k, 2)`` arrays indexed by ``[bin, arm]`` with arm 0 the
control and arm 1 the treatment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PriorTable:
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.array(self.alpha, dtype=float)
        self.beta = np.array(self.beta, dtype=float)
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 2 or self.alpha.shape[1] != 2:
            raise ValueError("prior tables must both have shape (k, 2)")
        if np.any(self.alpha < 0) or np.any(self.beta < 0):
            raise ValueError("prior hyperparameters must be nonnegative")

    @property
    def n_bins(self) -> int:
        return self.alpha.shape[0]

    def subset(self, bins) -> "PriorTable":
        return PriorTable(self.alpha[bins], self.beta[bins])


def init_uniform_prior(n_bins: int, value: float = 1.0) -> PriorTable:
    if value <= 0:
        raise ValueError("uniform prior value must be positive")
    full = np.full((n_bins, 2), float(value))
    return PriorTable(full, full.copy())


def zero_prior(n_bins: int) -> PriorTable:
    """Improper alpha = beta = 0 prior; usable in rewards, not for drawing."""
    return PriorTable(np.zeros((n_bins, 2)), np.zeros((n_bins, 2)))


def init_informed_prior(density, n_plus, n_minus) -> PriorTable:
    """``alpha = 1 + p(b) * n_plus[t]`` and ``beta = 1 + p(b) * n_minus[t]``.

    ``n_plus`` / ``n_minus`` are ballpark success / failure counts per arm,
    ordered ``(control, treatment)``.
    """
    p = np.asarray(density, dtype=float)
    n_plus = np.broadcast_to(np.asarray(n_plus, dtype=float), (2,))
    n_minus = np.broadcast_to(np.asarray(n_minus, dtype=float), (2,))
    if np.any(n_plus < 0) or np.any(n_minus < 0):
        raise ValueError("anticipated counts must be nonnegative")
    return PriorTable(1.0 + np.outer(p, n_plus), 1.0 + np.outer(p, n_minus))


@dataclass
class PosteriorState:
    """Prior, absorbed counts, and the generator that drives Thompson draws.

    ``alpha`` / ``beta`` always equal the initial prior plus successes /
    failures seen so far.
    """

    prior: PriorTable
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    n: np.ndarray = None
    s: np.ndarray = None

    def __post_init__(self):
        k = self.prior.n_bins
        if self.n is None:
            self.n = np.zeros((k, 2), dtype=np.int64)
        if self.s is None:
            self.s = np.zeros((k, 2), dtype=np.int64)

    @property
    def alpha(self) -> np.ndarray:
        return self.prior.alpha + self.s

    @property
    def beta(self) -> np.ndarray:
        return self.prior.beta + (self.n - self.s)

    def update(self, b: int, t: int, y: int) -> "PosteriorState":
        if y not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {y!r}")
        if not 0 <= b < self.n.shape[0]:
            raise IndexError(f"unknown bin {b}")
        self.n[b, t] += 1
        self.s[b, t] += y
        return self

    def draw_theta(self) -> np.ndarray:
        return draw_beta(self.rng, self.alpha, self.beta)

    def posterior_mean_uplift(self, b: int) -> float:
        return posterior_mean_uplift(self.prior, self.n, self.s, b)


def update(state: PosteriorState, b: int, t: int, y: int) -> PosteriorState:
    return state.update(b, t, y)


def draw_beta(rng: np.random.Generator, alpha, beta) -> np.ndarray:
    """Independent Beta(alpha, beta) draws as a ratio of two Gamma draws."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise ValueError("Thompson draws need strictly positive Beta parameters")
    x = rng.standard_gamma(alpha)
    y = rng.standard_gamma(beta)
    total = x + y
    # both gammas can underflow to 0 for tiny shapes; fall back to the mean there
    bad = total == 0
    if np.any(bad):
        total = np.where(bad, 1.0, total)
        x = np.where(bad, alpha / (alpha + beta), x)
    return x / total


def draw_theta(state: PosteriorState) -> np.ndarray:
    return state.draw_theta()


def arm_means(prior: PriorTable, n, s) -> np.ndarray:
    """Posterior-predictive means per (bin, arm); 0 where nothing defines them."""
    num = prior.alpha + s
    den = prior.alpha + prior.beta + n
    return np.divide(num, den, out=np.zeros_like(num, dtype=float), where=den > 0)


def posterior_mean_uplift(prior: PriorTable, n, s, b: int) -> float:
    den = prior.alpha[b] + prior.beta[b] + np.asarray(n)[b]
    if np.any(den <= 0):
        raise ZeroDivisionError(f"bin {b} has a zero posterior-predictive denominator")
    means = (prior.alpha[b] + np.asarray(s)[b]) / den
    return float(means[1] - means[0])
