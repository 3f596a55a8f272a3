"""Seeded multi-trial experiments: run samplers, evaluate, summarise and write results."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import metrics as M
from .designer import (
    DesignConfig,
    rct_sample,
    run_design,
    uniform_feature_sample,
    uniform_latent_sample,
)
from .discretize import LinearEmbedding, assign_bins, fit_grid
from .environments import ReplayPool, SyntheticEnvironment, SyntheticSpec, read_embedding, read_table
from .posterior import init_informed_prior, init_uniform_prior, zero_prior
from .rewards import RewardSpec

# fixed ids so a sampler's seeds do not depend on the sampler list
SAMPLER_IDS = {
    "rct": 0,
    "uniform-latent": 1,
    "uniform-feature": 2,
    "mse": 3,
    "ate": 4,
    "auq": 5,
    "erupt": 6,
}
DESIGNED = ("mse", "ate", "auq", "erupt")
SYNTHETIC_METRICS = ("mse", "ate_sq_error", "auq", "erupt")
REPLAY_METRICS = ("auq", "ate_sq_error", "erupt")
PRIORS = ("uniform", "informed", "zero")

RAW_HEADER = ["sampler", "metric", "size", "trial", "seed", "value"]
SUMMARY_HEADER = ["sampler", "metric", "size", "trials", "mean", "stderr"]


@dataclass
class ExperimentConfig:
    environment: str = "synthetic"
    uplift: str = "u1"
    pool: str | None = None
    embedding: str | None = None
    test_pool: str | None = None
    test_fraction: float = 0.2
    latent_dim: int = 2
    cells_per_dim: int = 20
    samplers: list = field(default_factory=lambda: ["mse", "ate", "auq", "rct", "uniform-latent"])
    sizes: list = field(default_factory=lambda: [100, 300, 1000, 3000])
    trials: int = 10
    batch: int = 1
    prior: str = "uniform"
    sampler_priors: dict = field(default_factory=lambda: {"auq": "informed"})
    informed_rates: list | None = None
    informed_scale: float = 1.0
    eval_prior: float = 1.0
    bootstrap: bool | None = None
    cost: float | None = None
    qini_points: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.environment not in ("synthetic", "replay"):
            raise ValueError("environment must be 'synthetic' or 'replay'")
        if self.environment == "replay" and not self.pool:
            raise ValueError("replay needs a pool file")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        self.sizes = [int(s) for s in self.sizes]
        if not self.sizes or self.sizes[0] < 1 or any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be positive and strictly ascending")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        unknown = [s for s in self.samplers if s not in SAMPLER_IDS]
        if unknown:
            raise ValueError(f"unknown samplers {unknown}; choose from {sorted(SAMPLER_IDS)}")
        for p in [self.prior, *self.sampler_priors.values()]:
            if p not in PRIORS:
                raise ValueError(f"unknown prior {p!r}; choose from {PRIORS}")
        if self.informed_rates is not None and len(self.informed_rates) != 2:
            raise ValueError("informed_rates needs one base rate per arm")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.eval_prior < 0:
            raise ValueError("eval_prior must be nonnegative")

    @property
    def metrics(self) -> tuple[str, ...]:
        return SYNTHETIC_METRICS if self.environment == "synthetic" else REPLAY_METRICS

    @property
    def use_bootstrap(self) -> bool:
        return self.environment == "replay" if self.bootstrap is None else bool(self.bootstrap)

    def prior_for(self, sampler: str) -> str:
        return self.sampler_priors.get(sampler, self.prior)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class ResultRow:
    sampler: str
    metric: str
    size: int
    trial: int
    seed: int
    value: float


def trial_seed(master: int, trial: int, sampler: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(trial, SAMPLER_IDS[sampler]))


def seed_label(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# --------------------------------------------------------------------------
# environments


class Setting:
    """Everything a trial needs that is shared read-only across trials."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        if config.environment == "synthetic":
            env = SyntheticEnvironment(SyntheticSpec(uplift=config.uplift), config.cells_per_dim)
            self.env = env
            self.density = env.density
            self.truth = env.uplift
            self.ate = env.ate
            self.test = None
            rates = env.density @ env.theta
        else:
            self.env, self.test = load_replay(config)
            self.density = self.env.density
            self.truth = None
            self.ate = self.test.ate
            pool = self.env
            rates = np.array([pool.outcome[pool.treatment == t].mean() for t in (0, 1)])
        self.rates = np.asarray(config.informed_rates if config.informed_rates is not None else rates, dtype=float)
        self.cost = self.ate if config.cost is None else float(config.cost)
        k = len(self.density)
        self.eval_prior = (
            init_uniform_prior(k, config.eval_prior) if config.eval_prior > 0 else zero_prior(k)
        )

    def prior(self, kind: str, n: int):
        k = len(self.density)
        if kind == "uniform":
            return init_uniform_prior(k)
        if kind == "zero":
            return zero_prior(k)
        # anticipated successes and failures per arm for an even split of n
        per_arm = self.config.informed_scale * n / 2.0
        return init_informed_prior(self.density, self.rates * per_arm, (1.0 - self.rates) * per_arm)


def load_replay(config: ExperimentConfig) -> tuple[ReplayPool, M.TestSet]:
    """Training pool and test set; the test rows come from a file or a seeded split."""
    header, data = read_table(config.pool)
    emb = read_embedding(config.embedding) if config.embedding else None
    if emb is not None and emb.shape[0] != data.shape[0]:
        raise ValueError("embedding rows do not match pool rows")
    if config.test_pool:
        test_header, test_data = read_table(config.test_pool)
        if test_header != header:
            raise ValueError("test pool header differs from pool header")
        train_rows = np.arange(data.shape[0])
        test_emb = None
    else:
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(2**31,)))
        perm = rng.permutation(data.shape[0])
        n_test = int(round(config.test_fraction * data.shape[0]))
        if n_test < 2 or n_test >= data.shape[0]:
            raise ValueError("pool too small for the requested test split")
        train_rows, test_rows = np.sort(perm[n_test:]), np.sort(perm[:n_test])
        test_data = data[test_rows]
        test_emb = emb[test_rows] if emb is not None else None
    try:
        ti, yi = header.index("treatment"), header.index("outcome")
    except ValueError as exc:
        raise ValueError(f"{config.pool}: header needs 'treatment' and 'outcome' columns") from exc
    feat = [i for i in range(len(header)) if i not in (ti, yi)]
    train = data[train_rows]
    if emb is None:
        embedder = LinearEmbedding(min(config.latent_dim, len(feat))).fit(train[:, feat])
        train_emb = embedder.transform(train[:, feat])
        test_emb = embedder.transform(test_data[:, feat])
    else:
        train_emb = emb[train_rows]
        if test_emb is None:
            raise ValueError("an embedding file cannot cover a separate test pool")
    grid = fit_grid(train_emb, config.cells_per_dim)
    pool = ReplayPool(train[:, feat], train[:, ti], train[:, yi], train_emb, grid,
                      [header[i] for i in feat])
    test = M.TestSet(assign_bins(grid, test_emb, clip=True), test_data[:, ti], test_data[:, yi])
    return pool, test


# --------------------------------------------------------------------------
# trials


def _sample(setting: Setting, sampler: str, n: int, ss) -> list:
    cfg = setting.config
    env = setting.env.fresh()
    if sampler == "rct":
        return rct_sample(env, DesignConfig(n, seed=ss))
    if sampler == "uniform-latent":
        return uniform_latent_sample(env, DesignConfig(n, seed=ss))
    if sampler == "uniform-feature":
        return uniform_feature_sample(env, DesignConfig(n, seed=ss))
    reward = RewardSpec(sampler, setting.cost if sampler == "erupt" else None)
    prior = setting.prior(cfg.prior_for(sampler), n)
    return run_design(env, prior, DesignConfig(n, reward, min(cfg.batch, n), ss))


def evaluate(setting: Setting, records, test: M.TestSet | None) -> dict:
    cfg = setting.config
    pr = setting.eval_prior
    model = M.fit_uplift_model(records, len(setting.density), pr.alpha, pr.beta)
    out = {}
    try:
        out["ate_sq_error"] = M.ate_sq_error(M.ate_hat(records, setting.density), setting.ate if test is None else test)
    except ValueError:
        out["ate_sq_error"] = math.nan
    if test is None:
        out["mse"] = M.mse_metric(model, setting.truth, setting.density)
        out["auq"] = M.population_qini_area(model.uplift, setting.truth, setting.density, model.observed)
        out["erupt"] = M.population_erupt(model.uplift, setting.truth, setting.density, setting.cost)
    else:
        try:
            out["auq"] = M.auq(M.qini_curve(test, model, cfg.qini_points), test.ate)
        except ValueError:
            out["auq"] = math.nan
        out["erupt"] = M.erupt_estimate(test, model, setting.cost)
    return out


def run_trial(setting: Setting, sampler: str, trial: int) -> list[ResultRow]:
    cfg = setting.config
    ss = trial_seed(cfg.seed, trial, sampler)
    label = seed_label(ss)
    test = setting.test
    if test is not None and cfg.use_bootstrap:
        test = test.resample(np.random.default_rng(ss.spawn(1)[0]))
    # size-dependent priors need a run per size; otherwise prefixes of one run
    per_size = sampler in DESIGNED and cfg.prior_for(sampler) == "informed"
    if not per_size:
        full = _sample(setting, sampler, cfg.sizes[-1], ss)
    rows = []
    for n in cfg.sizes:
        recs = _sample(setting, sampler, n, ss) if per_size else full[:n]
        values = evaluate(setting, recs, test)
        rows.extend(ResultRow(sampler, m, n, trial, label, float(values[m])) for m in cfg.metrics)
    return rows


_SETTINGS: dict = {}


def _setting_for(config: ExperimentConfig) -> Setting:
    key = json.dumps(config.to_dict(), sort_keys=True)
    if key not in _SETTINGS:
        _SETTINGS[key] = Setting(config)
    return _SETTINGS[key]


def _work(args) -> list[ResultRow]:
    config, sampler, trial = args
    return run_trial(_setting_for(config), sampler, trial)


def _sort_key(config: ExperimentConfig):
    sampler_rank = {s: i for i, s in enumerate(config.samplers)}
    metric_rank = {m: i for i, m in enumerate(config.metrics)}
    return lambda r: (sampler_rank[r.sampler], r.size, r.trial, metric_rank[r.metric])


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list[ResultRow]:
    """All (sampler, size, trial, metric) results, in a fixed order."""
    tasks = [(config, s, t) for s in config.samplers for t in range(config.trials)]
    rows: list[ResultRow] = []
    if workers <= 1:
        setting = Setting(config)
        for _, s, t in tasks:
            rows.extend(run_trial(setting, s, t))
    else:
        Setting(config)  # surface config and file errors before forking
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for chunk in ex.map(_work, tasks, chunksize=max(1, len(tasks) // (4 * workers))):
                rows.extend(chunk)
    rows.sort(key=_sort_key(config))
    return rows


# --------------------------------------------------------------------------
# summaries and output


@dataclass(frozen=True)
class SummaryRow:
    sampler: str
    metric: str
    size: int
    trials: int
    mean: float
    stderr: float


def summarize(rows) -> list[SummaryRow]:
    """Mean and standard error (sample std over sqrt(trials)) per (sampler, size, metric).

    Non-finite values are left out; a cell with none left is an error.
    """
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.sampler, r.metric, r.size), []).append(r.value)
    out = []
    for (sampler, metric, size), vals in cells.items():
        v = np.asarray(vals, dtype=float)
        v = v[np.isfinite(v)]
        if v.size == 0:
            raise ValueError(f"no finite values for {sampler}/{metric}/{size}")
        se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
        out.append(SummaryRow(sampler, metric, size, int(v.size), float(np.mean(v)), se))
    return out


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def write_raw(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_HEADER)
        for r in rows:
            w.writerow([r.sampler, r.metric, r.size, r.trial, r.seed, _fmt(r.value)])


def read_raw(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != RAW_HEADER:
            raise ValueError(f"{path}: unexpected header")
        return [ResultRow(s, m, int(n), int(t), int(seed), float(v)) for s, m, n, t, seed, v in reader]


def write_summary(summaries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in summaries:
            w.writerow([s.sampler, s.metric, s.size, s.trials, _fmt(s.mean), _fmt(s.stderr)])


def read_summary(path) -> list[SummaryRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected header")
        return [SummaryRow(s, m, int(n), int(k), float(a), float(b)) for s, m, n, k, a, b in reader]


def manifest(config: ExperimentConfig) -> dict:
    seeds = {
        s: [seed_label(trial_seed(config.seed, t, s)) for t in range(config.trials)] for s in config.samplers
    }
    return {
        "config": config.to_dict(),
        "master_seed": config.seed,
        "seed_derivation": "SeedSequence(master_seed, spawn_key=(trial, sampler_id))",
        "sampler_ids": {s: SAMPLER_IDS[s] for s in config.samplers},
        "trial_seeds": seeds,
    }


def emit(rows, config: ExperimentConfig, out_dir) -> dict:
    """Write raw rows, summaries and a manifest; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "raw": out / "results_raw.csv",
        "summary": out / "results_summary.csv",
        "manifest": out / "manifest.json",
    }
    write_raw(rows, paths["raw"])
    write_summary(summarize(rows) if rows else [], paths["summary"])
    with open(paths["manifest"], "w") as fh:
        json.dump(manifest(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
