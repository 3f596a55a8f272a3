"""Thompson-sampling experimental design and baseline samplers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .environments import PoolExhausted
from .posterior import PosteriorState, PriorTable, draw_beta, zero_prior
from .rewards import RewardSpec


@dataclass(frozen=True)
class TrialRecord:
    unit: float | int
    bin: int
    t: int
    y: int


@dataclass(frozen=True)
class DesignConfig:
    n: int
    reward: RewardSpec | None = None
    batch: int = 1
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("sample size must be nonnegative")
        if self.batch < 1:
            raise ValueError("batch size must be >= 1")


def streams(seed) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for posterior draws and for the environment."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def _design_loop(env, config: DesignConfig, reward_prior: PriorTable, density, theta_fixed=None) -> list[TrialRecord]:
    if config.reward is None:
        raise ValueError("designed sampling needs a reward spec")
    if config.n == 0:
        return []
    density = np.asarray(density if density is not None else env.density, dtype=float)
    cells = np.flatnonzero(density > 0)
    if cells.size == 0:
        raise ValueError("no populated bins to sample")
    p = density[cells]
    ra = np.ascontiguousarray(reward_prior.alpha[cells])
    rb = np.ascontiguousarray(reward_prior.beta[cells])
    post_rng, env_rng = streams(config.seed)
    state = None
    if theta_fixed is None:
        state = PosteriorState(reward_prior.subset(cells), rng=post_rng)
        theta_const = None
    else:
        theta_const = np.ascontiguousarray(np.asarray(theta_fixed, dtype=float)[cells])

    score = kernels.candidate_values
    code, cost = config.reward.code, config.reward.cost or 0.0
    k = cells.size
    n_obs = np.zeros((k, 2))
    pending = np.zeros((k, 2))
    exhausted = np.zeros((k, 2), dtype=bool)
    records: list[TrialRecord] = []
    batch = min(config.batch, config.n)

    while len(records) < config.n:
        picks = []
        for _ in range(min(batch, config.n - len(records))):
            if state is None:
                theta = theta_const
            else:
                theta = draw_beta(post_rng, state.alpha, state.beta)
            scores = score(code, p, ra, rb, theta, n_obs + pending, cost)
            if exhausted.any():
                scores[exhausted] = -np.inf
            flat = int(np.argmax(scores))
            b, t = divmod(flat, 2)
            got = env.draw(int(cells[b]), t, env_rng)
            if got is None:
                # next preference in descending score order, ties by index
                exhausted[b, t] = True
                for flat in np.argsort(-scores.ravel(), kind="stable"):
                    b, t = divmod(int(flat), 2)
                    if exhausted[b, t]:
                        continue
                    got = env.draw(int(cells[b]), t, env_rng)
                    if got is not None:
                        break
                    exhausted[b, t] = True
                if got is None:
                    raise PoolExhausted("every (bin, arm) combination is exhausted")
            pending[b, t] += 1
            picks.append((b, t, got))
        for b, t, (unit, y) in picks:
            n_obs[b, t] += 1
            if state is not None:
                state.update(b, t, y)
            records.append(TrialRecord(unit, int(cells[b]), t, int(y)))
        pending[:] = 0
    return records


def run_design(env, prior: PriorTable, config: DesignConfig, density=None) -> list[TrialRecord]:
    """Thompson-sampling design targeting ``config.reward``.

    Each selection draws a fresh outcome table from the current posterior and
    picks the (bin, arm) whose extra count maximises the expected reward.
    With ``batch > 1`` the posterior is only updated between batches while
    counts advance per pick.
    """
    return _design_loop(env, config, prior, density)


def run_design_pointmass(env, theta_true, config: DesignConfig, density=None) -> list[TrialRecord]:
    """Design with the posterior fixed at the true outcome table and a zero prior."""
    density = env.density if density is None else density
    return _design_loop(env, config, zero_prior(len(density)), density, theta_fixed=theta_true)


def rct_sample(env, config: DesignConfig) -> list[TrialRecord]:
    """Units from the population density, arms by fair coin."""
    _, rng = streams(config.seed)
    records = []
    for _ in range(config.n):
        t = int(rng.integers(2))
        got = env.draw_population(t, rng)
        if got is None:
            got = env.draw_population(1 - t, rng)
            t = 1 - t
            if got is None:
                raise PoolExhausted("pool has no rows left in either arm")
        unit, b, y = got
        records.append(TrialRecord(unit, b, t, y))
    return records


def _uniform_over(labels, draw, config: DesignConfig, bin_of) -> list[TrialRecord]:
    _, rng = streams(config.seed)
    alive = {c: {0, 1} for c in (int(c) for c in labels)}
    records = []
    for _ in range(config.n):
        while True:
            if not alive:
                raise PoolExhausted("every cell is exhausted")
            keys = list(alive)
            c = keys[int(rng.integers(len(keys)))]
            t = int(rng.integers(2))
            if t not in alive[c]:
                continue
            got = draw(c, t, rng)
            if got is not None:
                break
            alive[c].discard(t)
            if not alive[c]:
                del alive[c]
        records.append(bin_of(c, t, got))
    return records


def uniform_latent_sample(env, config: DesignConfig, density=None) -> list[TrialRecord]:
    """Cell uniform over populated grid cells, unit uniform within it, fair-coin arm.

    A (cell, arm) found exhausted is dropped and a new cell drawn.
    """
    density = env.density if density is None else density
    cells = np.flatnonzero(np.asarray(density) > 0)
    if cells.size == 0:
        raise ValueError("no populated cells")
    return _uniform_over(
        cells, env.draw, config, lambda c, t, got: TrialRecord(got[0], c, t, int(got[1]))
    )


def uniform_feature_sample(env, config: DesignConfig, median_codes=None) -> list[TrialRecord]:
    """Populated median-split bin uniform, unit uniform within it, fair-coin arm."""
    codes = env.feature_codes if median_codes is None else np.unique(median_codes)
    if len(codes) == 0:
        raise ValueError("no populated feature bins")
    return _uniform_over(
        codes, env.draw_feature, config, lambda c, t, got: TrialRecord(got[0], got[1], t, int(got[2]))
    )
