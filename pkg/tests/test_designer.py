import numpy as np
import pytest
from scipy import stats

from taskdesign.designer import (
    DesignConfig,
    rct_sample,
    run_design,
    run_design_pointmass,
    uniform_feature_sample,
    uniform_latent_sample,
)
from taskdesign.discretize import Grid
from taskdesign.environments import PoolExhausted, ReplayPool
from taskdesign.metrics import record_counts
from taskdesign.posterior import init_uniform_prior
from taskdesign.rewards import RewardSpec


def grid_pool(rng, per_cell_arm, cells=4, ndim=2, outcome_rate=0.3, features=None):
    """Pool with ``per_cell_arm`` rows in every (cell, arm) of a cells^ndim grid."""
    grid = Grid(np.zeros(ndim), np.ones(ndim), cells)
    n_bins = grid.n_bins
    centers = grid.cell_centers(grid.unflatten(np.arange(n_bins)))
    emb = np.repeat(centers, 2 * per_cell_arm, axis=0)
    t = np.tile(np.repeat([0, 1], per_cell_arm), n_bins)
    y = (rng.random(emb.shape[0]) < outcome_rate).astype(int)
    feats = emb if features is None else features
    return ReplayPool(feats, t, y, emb, grid)


class TestRunDesign:
    def test_empty(self, env_u1):
        assert run_design(env_u1, init_uniform_prior(20), DesignConfig(0, RewardSpec("mse"))) == []

    def test_deterministic(self, env_u1):
        cfg = DesignConfig(300, RewardSpec("auq"), seed=11)
        a = run_design(env_u1, init_uniform_prior(20), cfg)
        b = run_design(env_u1, init_uniform_prior(20), cfg)
        assert a == b
        assert len(a) == 300

    def test_records_consistent_with_units(self, env_u1):
        recs = run_design(env_u1, init_uniform_prior(20), DesignConfig(200, RewardSpec("ate"), seed=2))
        assert all(env_u1.bin_of(r.unit) == r.bin for r in recs)

    @pytest.mark.parametrize("batch", [1, 7, 200])
    def test_batch_sizes(self, env_u1, batch):
        recs = run_design(env_u1, init_uniform_prior(20), DesignConfig(200, RewardSpec("mse"), batch, seed=5))
        assert len(recs) == 200

    def test_batch_spreads_counts(self, env_u1):
        # with a frozen posterior the running counts still move the argmax
        recs = run_design(env_u1, init_uniform_prior(20), DesignConfig(100, RewardSpec("mse"), 100, seed=1))
        n, _ = record_counts(recs, 20)
        assert np.count_nonzero(n) > 4

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            DesignConfig(-1)
        with pytest.raises(ValueError):
            DesignConfig(10, batch=0)

    def test_needs_reward(self, env_u1):
        with pytest.raises(ValueError):
            run_design(env_u1, init_uniform_prior(20), DesignConfig(5))


class TestPointMass:
    def test_auq_peaks_at_gradient(self, env_u1):
        recs = run_design_pointmass(env_u1, env_u1.theta, DesignConfig(1000, RewardSpec("auq")))
        n, _ = record_counts(recs, 20)
        per_bin = n.sum(axis=1)
        # bins 2..5 cover x in [0.1, 0.3], around the sigmoid centre at 0.2
        assert 2 <= int(np.argmax(per_bin)) <= 5
        assert per_bin[2:6].sum() / 1000 > env_u1.density[2:6].sum()

    def test_ate_arms_differ(self, env_u2):
        recs = run_design_pointmass(env_u2, env_u2.theta, DesignConfig(3000, RewardSpec("ate")))
        n, _ = record_counts(recs, 20)
        assert np.max(np.abs(n[:, 1] - n[:, 0])) > 50

    def test_mse_uniform_symmetric(self, env_u1):
        density = np.full(20, 1 / 20)
        theta = np.full((20, 2), 0.4)
        recs = run_design_pointmass(env_u1, theta, DesignConfig(803, RewardSpec("mse")), density=density)
        n, _ = record_counts(recs, 20)
        assert n.max() - n.min() <= 1
        assert np.all(np.abs(n[:, 1] - n[:, 0]) <= 1)


class TestBaselines:
    def test_rct_arms_balanced(self, env_u1):
        recs = rct_sample(env_u1, DesignConfig(10_000, seed=4))
        n1 = sum(r.t for r in recs)
        assert abs(n1 - 5000) <= 3 * np.sqrt(10_000 / 4)

    def test_rct_bins_follow_density(self, env_u1):
        recs = rct_sample(env_u1, DesignConfig(100_000, seed=8))
        counts = np.bincount([r.bin for r in recs], minlength=20)
        keep = env_u1.density * 100_000 >= 5
        exp = env_u1.density[keep] / env_u1.density[keep].sum() * counts[keep].sum()
        assert stats.chisquare(counts[keep], exp).pvalue > 0.01

    def test_rct_empty(self, env_u1):
        assert rct_sample(env_u1, DesignConfig(0)) == []

    def test_uniform_latent_never_empty_cells(self, rng):
        pool = grid_pool(rng, 50)
        # drop cell 3 entirely
        keep = pool.bins != 3
        pool = ReplayPool(pool.features[keep], pool.treatment[keep], pool.outcome[keep], pool.embedding[keep], pool.grid)
        recs = uniform_latent_sample(pool.fresh(), DesignConfig(500, seed=1))
        assert all(r.bin != 3 for r in recs)
        assert all(pool.bins[r.unit] == r.bin for r in recs)

    def test_uniform_latent_single_cell(self, rng):
        pool = grid_pool(rng, 200, cells=1, ndim=1)
        recs = uniform_latent_sample(pool.fresh(), DesignConfig(200, seed=3))
        assert {r.bin for r in recs} == {0}
        assert abs(sum(r.t for r in recs) - 100) <= 3 * np.sqrt(50)

    def test_uniform_latent_chi_square(self, rng):
        pool = grid_pool(rng, 1000)
        recs = uniform_latent_sample(pool.fresh(), DesignConfig(16_000, seed=2))
        counts = np.bincount([r.bin for r in recs], minlength=16)
        assert stats.chisquare(counts).pvalue > 0.01

    def test_uniform_feature(self, rng):
        feats = rng.normal(size=(8000, 3))
        pool = grid_pool(rng, 250, features=feats)
        assert pool.feature_codes.size <= 2**3
        recs = uniform_feature_sample(pool.fresh(), DesignConfig(2000, seed=7))
        codes = pool.codes[[r.unit for r in recs]]
        counts = np.bincount(codes, minlength=8)[pool.feature_codes]
        assert stats.chisquare(counts).pvalue > 0.01

    def test_uniform_feature_single_code(self, rng):
        pool = grid_pool(rng, 100, features=np.zeros((3200, 1)))
        recs = uniform_feature_sample(pool.fresh(), DesignConfig(300, seed=1))
        assert len(recs) == 300

    def test_exhaustion(self, rng):
        pool = grid_pool(rng, 2, cells=2, ndim=1)
        with pytest.raises(PoolExhausted):
            rct_sample(pool.fresh(), DesignConfig(9))
        with pytest.raises(PoolExhausted):
            uniform_latent_sample(pool.fresh(), DesignConfig(9))


class TestReplayDesign:
    def test_fallback_consumes_whole_pool(self, rng):
        pool = grid_pool(rng, 3, cells=3, ndim=1)
        recs = run_design(pool.fresh(), init_uniform_prior(3), DesignConfig(len(pool), RewardSpec("auq"), seed=0))
        assert sorted(r.unit for r in recs) == list(range(len(pool)))
        with pytest.raises(PoolExhausted):
            run_design(pool.fresh(), init_uniform_prior(3), DesignConfig(len(pool) + 1, RewardSpec("auq")))

    def test_fallback_in_batch_mode(self, rng):
        pool = grid_pool(rng, 5, cells=2, ndim=1)
        recs = run_design(pool.fresh(), init_uniform_prior(2), DesignConfig(20, RewardSpec("ate"), 8, seed=3))
        assert len({r.unit for r in recs}) == 20
