"""Closed-form expected target metrics and the greedy selection step.

Each ``f_*`` returns the expected value of a target metric (negated for
errors, so larger is always better) for the binned empirical uplift model
at fixed per-(bin, arm) counts and a fixed outcome-probability table.

The functions here evaluate the formulas directly and serve as the
reference; :func:`select_next` scores all candidates through the
incremental kernel in :mod:`taskdesign.kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._kernels_py import arm_bias_var, effective_counts, erf_ratio

KINDS = {"mse": kernels.MSE, "ate": kernels.ATE, "auq": kernels.AUQ, "erupt": kernels.ERUPT}


@dataclass(frozen=True)
class RewardSpec:
    kind: str
    cost: float | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValueError(f"unknown reward kind {self.kind!r}; expected one of {sorted(KINDS)}")
        object.__setattr__(self, "kind", kind)
        if (kind == "erupt") != (self.cost is not None):
            raise ValueError("cost must be given for ERUPT and only for ERUPT")

    @property
    def code(self) -> int:
        return KINDS[self.kind]


@dataclass
class RewardContext:
    """Density ``p``, prior ``alpha``/``beta``, outcome table ``theta`` and counts ``n``."""

    density: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=float)
        k = self.density.shape[0]
        for name in ("alpha", "beta", "theta", "n"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (k, 2):
                raise ValueError(f"{name} must have shape ({k}, 2), got {arr.shape}")
            setattr(self, name, arr)

    @property
    def n_bins(self) -> int:
        return self.density.shape[0]

    def with_counts(self, n) -> "RewardContext":
        return RewardContext(self.density, self.alpha, self.beta, self.theta, n)


def _check_denominators(ctx: RewardContext, b: int):
    if np.any(ctx.alpha[b] + ctx.beta[b] + ctx.n[b] <= 0):
        raise ZeroDivisionError(f"bin {b} has alpha + beta + n = 0 in some arm")


def bin_bias(ctx: RewardContext, b: int, strict: bool = True) -> float:
    """Expected error of the bin's uplift estimate.

    With ``strict=False`` an arm whose denominator vanishes is treated as
    half an observation (bias 0, variance ``2 theta (1 - theta)``).
    """
    if strict:
        _check_denominators(ctx, b)
    bias, _ = arm_bias_var(ctx.alpha[b], ctx.beta[b], ctx.theta[b], ctx.n[b])
    return float(bias[1] - bias[0])


def bin_variance(ctx: RewardContext, b: int, strict: bool = True) -> float:
    if strict:
        _check_denominators(ctx, b)
    _, var = arm_bias_var(ctx.alpha[b], ctx.beta[b], ctx.theta[b], ctx.n[b])
    return float(var.sum())


def _bias_var(ctx: RewardContext):
    bias, var = arm_bias_var(ctx.alpha, ctx.beta, ctx.theta, ctx.n)
    return bias[:, 1] - bias[:, 0], var.sum(axis=1)


def f_mse(ctx: RewardContext) -> float:
    bias, var = _bias_var(ctx)
    return -float(np.sum(ctx.density * (bias**2 + var)))


def f_ate(ctx: RewardContext) -> float:
    bias, var = _bias_var(ctx)
    return -float(np.dot(ctx.density, bias) ** 2) - float(np.sum(ctx.density**2 * var))


def uplift_spread(ctx: RewardContext) -> np.ndarray:
    """Large-sample variance of each bin's uplift estimate, ``sum_t theta(1-theta)/n``."""
    ne = effective_counts(ctx.alpha, ctx.beta, ctx.n)
    return (ctx.theta * (1.0 - ctx.theta) / ne).sum(axis=1)


def f_auq(ctx: RewardContext) -> float:
    """Large-sample expected AUQ, without the count-independent ``-ATE/2`` term."""
    p = ctx.density
    u = ctx.theta[:, 1] - ctx.theta[:, 0]
    s = uplift_spread(ctx)
    total = 0.0
    for b in range(ctx.n_bins):
        for b2 in range(ctx.n_bins):
            if b == b2:
                continue
            e = erf_ratio(u[b2] - u[b], s[b] + s[b2])
            total += p[b] * p[b2] * u[b2] * (0.5 + 0.5 * float(e))
    return total


def f_erupt(ctx: RewardContext, cost: float) -> float:
    p = ctx.density
    mu = ctx.theta[:, 1] - ctx.theta[:, 0] - cost
    s = uplift_spread(ctx)
    return float(np.sum(0.5 * p * (1.0 + erf_ratio(mu, s)) * mu))


def evaluate(ctx: RewardContext, spec: RewardSpec) -> float:
    if spec.kind == "mse":
        return f_mse(ctx)
    if spec.kind == "ate":
        return f_ate(ctx)
    if spec.kind == "auq":
        return f_auq(ctx)
    return f_erupt(ctx, spec.cost)


def candidate_scores(ctx: RewardContext, spec: RewardSpec) -> np.ndarray:
    """Reward after incrementing each ``(b, t)`` count by one; shape ``(k, 2)``."""
    if ctx.n_bins == 0:
        raise ValueError("no candidate bins")
    return kernels.candidate_values(
        spec.code, ctx.density, ctx.alpha, ctx.beta, ctx.theta, ctx.n, spec.cost or 0.0
    )


def select_next(ctx: RewardContext, spec: RewardSpec) -> tuple[int, int]:
    """Greedy argmax over single-count increments.

    Ties go to the lowest bin index, then arm 0.
    """
    scores = candidate_scores(ctx, spec)
    flat = int(np.argmax(scores))
    return flat // 2, flat % 2
