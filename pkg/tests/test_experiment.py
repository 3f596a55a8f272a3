import json
import math

import numpy as np
import pytest

from taskdesign import experiment as E
from taskdesign.designer import DesignConfig, rct_sample
from taskdesign.environments import SyntheticSpec, synthetic_sample_x


def write_pool(path, rng, n=3000):
    """Pooled RCT on the synthetic population with one extra noise feature."""
    spec = SyntheticSpec()
    x = synthetic_sample_x(rng, spec, n)
    t = rng.integers(0, 2, n)
    y = (rng.random(n) < np.where(t == 1, spec.propensity(x, 1), spec.propensity(x, 0))).astype(int)
    noise = rng.normal(size=n)
    with open(path, "w") as fh:
        fh.write("x,noise,treatment,outcome\n")
        for row in zip(x, noise, t, y):
            fh.write("%r,%r,%d,%d\n" % (float(row[0]), float(row[1]), row[2], row[3]))
    return path


def small(**kw):
    base = dict(samplers=["rct", "auq"], sizes=[20, 50], trials=3, seed=7)
    base.update(kw)
    return E.ExperimentConfig(**base)


class TestConfig:
    def test_defaults_round_trip(self, tmp_path):
        cfg = E.ExperimentConfig()
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert E.ExperimentConfig.from_json(path) == cfg

    @pytest.mark.parametrize(
        "bad",
        [
            {"environment": "lab"},
            {"environment": "replay"},
            {"trials": 0},
            {"sizes": [100, 50]},
            {"sizes": []},
            {"batch": 0},
            {"samplers": ["thompson"]},
            {"prior": "flat"},
            {"informed_rates": [0.1]},
            {"test_fraction": 1.0},
            {"eval_prior": -1.0},
        ],
    )
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            E.ExperimentConfig(**bad)

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            E.ExperimentConfig.from_dict({"trails": 3})

    def test_prior_lookup(self):
        cfg = E.ExperimentConfig()
        assert cfg.prior_for("auq") == "informed"
        assert cfg.prior_for("mse") == "uniform"


class TestSeeds:
    def test_stable_across_sampler_lists(self):
        a = E.trial_seed(5, 2, "auq").generate_state(4)
        b = E.trial_seed(5, 2, "auq").generate_state(4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, E.trial_seed(5, 2, "ate").generate_state(4))
        assert not np.array_equal(a, E.trial_seed(5, 3, "auq").generate_state(4))

    def test_shared_seed_across_sizes(self):
        rows = E.run_experiment(small(samplers=["rct"]))
        for trial in range(3):
            assert len({r.seed for r in rows if r.trial == trial}) == 1


class TestRun:
    def test_row_count(self):
        cfg = E.ExperimentConfig(samplers=["rct"], sizes=[10], trials=1)
        rows = E.run_experiment(cfg)
        assert len(rows) == 4
        assert [r.metric for r in rows] == list(E.SYNTHETIC_METRICS)

    def test_prefix_evaluation_matches_direct(self):
        cfg = small(samplers=["rct"], trials=1)
        setting = E.Setting(cfg)
        rows = E.run_trial(setting, "rct", 0)
        recs = rct_sample(setting.env, DesignConfig(20, seed=E.trial_seed(7, 0, "rct")))
        direct = E.evaluate(setting, recs, None)
        got = {r.metric: r.value for r in rows if r.size == 20}
        assert got == pytest.approx(direct)

    def test_deterministic_files(self, tmp_path):
        cfg = small()
        E.emit(E.run_experiment(cfg), cfg, tmp_path / "a")
        E.emit(E.run_experiment(cfg), cfg, tmp_path / "b")
        E.emit(E.run_experiment(cfg, workers=2), cfg, tmp_path / "c")
        for name in ("results_raw.csv", "results_summary.csv", "manifest.json"):
            a = (tmp_path / "a" / name).read_bytes()
            assert a == (tmp_path / "b" / name).read_bytes()
            assert a == (tmp_path / "c" / name).read_bytes()

    def test_different_seed_differs(self):
        a = E.run_experiment(small(samplers=["rct"]))
        b = E.run_experiment(small(samplers=["rct"], seed=8))
        assert [r.value for r in a] != [r.value for r in b]

    def test_replay(self, tmp_path, rng):
        pool = write_pool(tmp_path / "pool.csv", rng)
        cfg = small(environment="replay", pool=str(pool), cells_per_dim=5, sizes=[100, 200], trials=2)
        rows = E.run_experiment(cfg)
        assert {r.metric for r in rows} == set(E.REPLAY_METRICS)
        assert len(rows) == 2 * 2 * 2 * 3
        assert sum(math.isfinite(r.value) for r in rows) >= len(rows) - 4

    def test_replay_split_is_seeded(self, tmp_path, rng):
        pool = write_pool(tmp_path / "pool.csv", rng, 500)
        cfg = small(environment="replay", pool=str(pool), cells_per_dim=4)
        _, t1 = E.load_replay(cfg)
        _, t2 = E.load_replay(cfg)
        np.testing.assert_array_equal(t1.y, t2.y)
        _, t3 = E.load_replay(small(environment="replay", pool=str(pool), cells_per_dim=4, seed=99))
        assert len(t1) == len(t3) == 100
        assert not (np.array_equal(t1.y, t3.y) and np.array_equal(t1.t, t3.t))

    def test_replay_separate_test_pool(self, tmp_path, rng):
        pool = write_pool(tmp_path / "pool.csv", rng, 800)
        test = write_pool(tmp_path / "test.csv", rng, 300)
        cfg = small(environment="replay", pool=str(pool), test_pool=str(test), cells_per_dim=4)
        train, t = E.load_replay(cfg)
        assert len(train) == 800 and len(t) == 300
        assert t.bins.min() >= 0 and t.bins.max() < train.n_bins


class TestSummaries:
    def row(self, v, trial=0, sampler="rct"):
        return E.ResultRow(sampler, "auq", 100, trial, 1, v)

    def test_constant(self):
        (s,) = E.summarize([self.row(0.3, i) for i in range(5)])
        assert s.mean == pytest.approx(0.3) and s.stderr == 0.0

    def test_zero_one(self):
        (s,) = E.summarize([self.row(0.0, 0), self.row(1.0, 1)])
        assert s.mean == 0.5 and s.stderr == pytest.approx(0.5)

    def test_recompute(self, rng):
        vals = rng.normal(size=37)
        (s,) = E.summarize([self.row(v, i) for i, v in enumerate(vals)])
        assert s.mean == pytest.approx(vals.mean(), abs=1e-12)
        assert s.stderr == pytest.approx(vals.std(ddof=1) / np.sqrt(37), abs=1e-12)

    def test_nan_left_out(self):
        (s,) = E.summarize([self.row(1.0, 0), self.row(math.nan, 1), self.row(3.0, 2)])
        assert s.trials == 2 and s.mean == 2.0
        with pytest.raises(ValueError):
            E.summarize([self.row(math.nan)])

    def test_single_trial_stderr_nan(self):
        (s,) = E.summarize([self.row(0.2)])
        assert math.isnan(s.stderr)


class TestOutput:
    def test_empty_results(self, tmp_path):
        cfg = small()
        paths = E.emit([], cfg, tmp_path)
        assert paths["raw"].read_text() == ",".join(E.RAW_HEADER) + "\n"
        assert paths["summary"].read_text() == ",".join(E.SUMMARY_HEADER) + "\n"

    def test_raw_round_trip(self, tmp_path):
        rows = E.run_experiment(small(samplers=["rct"]))
        E.write_raw(rows, tmp_path / "r.csv")
        assert E.read_raw(tmp_path / "r.csv") == rows

    def test_summary_round_trip(self, tmp_path):
        summ = E.summarize(E.run_experiment(small(samplers=["rct"])))
        E.write_summary(summ, tmp_path / "s.csv")
        assert E.read_summary(tmp_path / "s.csv") == summ

    def test_bad_header(self, tmp_path):
        (tmp_path / "r.csv").write_text("a,b\n")
        with pytest.raises(ValueError):
            E.read_raw(tmp_path / "r.csv")

    def test_manifest(self, tmp_path):
        cfg = small()
        paths = E.emit(E.run_experiment(cfg), cfg, tmp_path)
        man = json.loads(paths["manifest"].read_text())
        assert set(man["config"]) == {f for f in cfg.to_dict()}
        assert man["master_seed"] == 7
        assert man["trial_seeds"]["auq"][1] == E.seed_label(E.trial_seed(7, 1, "auq"))
