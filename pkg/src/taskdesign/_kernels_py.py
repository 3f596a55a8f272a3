"""Pure numpy candidate scoring; the fallback for the compiled ``_ckernels``.

``candidate_values`` returns, for every (bin, arm), the reward evaluated
with that single count incremented by one.  Both backends share this
signature and agree to floating-point rounding.
"""

import numpy as np
from scipy.special import erf

MSE, ATE, AUQ, ERUPT = 0, 1, 2, 3
SIGN = np.array([-1.0, 1.0])


def arm_bias_var(alpha, beta, theta, n):
    """Per-arm bias of the posterior-predictive mean and its variance.

    An arm whose denominator ``alpha + beta + n`` is zero (empty arm, zero
    prior) is extrapolated from the unbiased ``1/n`` branch at half an
    observation: bias 0 and variance ``2 theta (1 - theta)``.
    """
    den = alpha + beta + n
    pos = den > 0
    safe = np.where(pos, den, 1.0)
    bias = np.where(pos, (alpha - (alpha + beta) * theta) / safe, 0.0)
    var = np.where(pos, theta * (1.0 - theta) * n / (safe * safe), 2.0 * theta * (1.0 - theta))
    return bias, var


def effective_counts(alpha, beta, n):
    """Counts used in the large-sample spread; an empty zero-prior cell counts as half."""
    ne = n + alpha + beta
    return np.where(ne > 0, ne, 0.5)


def erf_ratio(num, var):
    """``erf(num / sqrt(2 var))`` with the ``var -> 0`` limit ``sign(num)``."""
    num = np.asarray(num, dtype=float)
    var = np.asarray(var, dtype=float)
    pos = var > 0
    out = np.sign(num)
    return np.where(pos, erf(num / np.sqrt(2.0 * np.where(pos, var, 1.0))), out)


def candidate_values(kind, p, alpha, beta, theta, n, cost=0.0):
    p = np.asarray(p, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    n = np.asarray(n, dtype=float)

    if kind in (MSE, ATE):
        e0, v0 = arm_bias_var(alpha, beta, theta, n)
        e1, v1 = arm_bias_var(alpha, beta, theta, n + 1.0)
        bias = e0 @ SIGN
        var = v0.sum(axis=1)
        new_bias = bias[:, None] + SIGN * (e1 - e0)
        new_var = var[:, None] + (v1 - v0)
        if kind == MSE:
            terms = p * (bias * bias + var)
            base = -terms.sum()
            return base + terms[:, None] - p[:, None] * (new_bias * new_bias + new_var)
        B = p @ bias
        V = (p * p) @ var
        B_new = B + p[:, None] * (new_bias - bias[:, None])
        V_new = V + (p * p)[:, None] * (new_var - var[:, None])
        return -B_new * B_new - V_new

    u = theta[:, 1] - theta[:, 0]
    cell_var = theta * (1.0 - theta)
    ne = effective_counts(alpha, beta, n)
    s = (cell_var / ne).sum(axis=1)
    s_new = s[:, None] + cell_var / (n + 1.0 + alpha + beta) - cell_var / ne

    if kind == ERUPT:
        mu = u - cost
        terms = 0.5 * p * (1.0 + erf_ratio(mu, s)) * mu
        new_terms = 0.5 * (p * mu)[:, None] * (1.0 + erf_ratio(mu[:, None], s_new))
        return terms.sum() - terms[:, None] + new_terms

    if kind != AUQ:
        raise ValueError(f"unknown reward kind {kind}")
    k = p.size
    gap = np.abs(u[:, None] - u[None, :])
    weight = 0.5 * np.outer(p, p) * gap
    np.fill_diagonal(weight, 0.0)
    rows = (weight * erf_ratio(gap, s[:, None] + s[None, :])).sum(axis=1)
    # candidate (b, t) replaces row b of the pair sum
    new_e = erf_ratio(gap[:, None, :], s_new[:, :, None] + s[None, None, :])
    new_rows = np.einsum("bj,btj->bt", weight, new_e)
    const = 0.5 * np.sum(p * u * (p.sum() - p))
    base = const + 0.5 * rows.sum()
    out = base - rows[:, None] + new_rows
    return out.reshape(k, 2)
