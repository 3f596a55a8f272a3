import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from taskdesign.discretize import (
    Grid,
    LinearEmbedding,
    assign_bin,
    assign_bins,
    bin_density,
    fit_grid,
    linear_embed,
    median_split_bins,
)


class TestFitGrid:
    def test_bounding_box(self):
        g = fit_grid([(0, 0), (1, 2)], 2)
        np.testing.assert_array_equal(g.lower, [0, 0])
        np.testing.assert_array_equal(g.upper, [1, 2])
        assert g.n_bins == 4

    def test_single_point_widened(self):
        g = fit_grid([(3.0, 3.0)], 20)
        assert np.all(g.lower < 3.0) and np.all(g.upper > 3.0)
        np.testing.assert_allclose(g.upper - g.lower, 2 * 3e-9)
        assert assign_bin(g, (3.0, 3.0)) in {(9, 9), (10, 10)}

    def test_widening_at_zero(self):
        g = fit_grid([0.0, 0.0], 3)
        np.testing.assert_allclose([g.lower[0], g.upper[0]], [-1e-9, 1e-9])

    def test_random_box_matches_min_max(self, rng):
        pts = rng.uniform([-2, 5], [3, 9], size=(1000, 2))
        g = fit_grid(pts, 20)
        assert g.n_bins == 400
        np.testing.assert_array_equal(g.lower, pts.min(axis=0))
        np.testing.assert_array_equal(g.upper, pts.max(axis=0))

    @pytest.mark.parametrize(
        "points, cells",
        [([], 2), ([(0, 0), (1, 2)], 0), ([[0.0, 1.0], [1.0]], 2), ([(0.0, np.nan)], 2)],
    )
    def test_errors(self, points, cells):
        with pytest.raises(ValueError):
            fit_grid(points, cells)

    def test_round_trip_dict(self):
        g = Grid([0.0, -1.0], [1.0, 1.0], 7)
        assert Grid.from_dict(g.to_dict()) == g
        assert Grid.from_dict(g.to_dict()) != Grid([0.0, -1.0], [1.0, 1.0], 8)


class TestAssignBin:
    grid = Grid([0.0, 0.0], [1.0, 1.0], 2)

    def test_floor(self):
        assert assign_bin(self.grid, (0.6, 0.1)) == (1, 0)

    def test_upper_boundary_goes_to_last_cell(self):
        assert assign_bin(self.grid, (1.0, 1.0)) == (1, 1)

    def test_outside_raises(self):
        with pytest.raises(ValueError):
            assign_bin(self.grid, (1.01, 0.5))

    def test_clip(self):
        assert assign_bins(self.grid, [(1.5, -3.0)], clip=True)[0] == self.grid.flatten((1, 0))

    def test_centers_round_trip(self, rng):
        g = Grid([-1.0, 2.0], [3.0, 4.0], 20)
        pts = rng.uniform(g.lower, g.upper, size=(10_000, 2))
        centers = g.cell_centers(g.unflatten(assign_bins(g, pts)))
        assert np.all(np.abs(centers - pts) <= g.widths / 2 + 1e-12)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (30, 3), elements=st.floats(-1e3, 1e3)), st.integers(1, 12))
    def test_fitted_points_get_valid_bins(self, pts, cells):
        g = fit_grid(pts, cells)
        bins = assign_bins(g, pts)
        assert np.all((bins >= 0) & (bins < g.n_bins))
        # same cell implies same flat id
        idx = g.unflatten(bins)
        assert np.all((idx >= 0) & (idx < cells))


class TestBinDensity:
    def test_uniform(self):
        g = Grid([0.0, 0.0], [1.0, 1.0], 2)
        d = bin_density(g, [(0.1, 0.1), (0.9, 0.1), (0.1, 0.9), (0.9, 0.9)])
        np.testing.assert_array_equal(d, 0.25)

    def test_single_cell(self):
        g = Grid([0.0], [1.0], 4)
        np.testing.assert_array_equal(bin_density(g, [0.1, 0.2, 0.05]), [1, 0, 0, 0])

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            bin_density(Grid([0.0], [1.0], 4), [])

    def test_truncated_normal_profile_decreasing(self, rng):
        x = np.abs(rng.normal(0, 0.2, size=400_000))
        x = x[x <= 1.0]
        d = bin_density(Grid([0.0], [1.0], 20), x)
        assert abs(d.sum() - 1.0) < 1e-12
        assert np.all(np.diff(d[:12]) < 0)


class TestMedianSplit:
    def test_one_feature(self):
        np.testing.assert_array_equal(median_split_bins([1, 2, 3, 4]), [0, 0, 1, 1])

    def test_ties_go_low(self):
        np.testing.assert_array_equal(median_split_bins([1, 2, 2, 3, 9]), [0, 0, 0, 1, 1])

    def test_quadrants(self):
        codes = median_split_bins([[0, 0], [0, 1], [1, 0], [1, 1]])
        assert len(set(codes.tolist())) == 4

    def test_many_features_bounded(self, rng):
        codes = median_split_bins(rng.normal(size=(500, 12)))
        assert codes.min() >= 0 and codes.max() < 4096
        assert np.unique(codes).size <= 500

    def test_empty(self):
        with pytest.raises(ValueError):
            median_split_bins(np.zeros((0, 2)))


class TestLinearEmbed:
    def test_uncorrelated_preserves_distances(self, rng):
        raw = rng.normal(size=(400, 2))
        # exactly uncorrelated, unit-variance columns
        q, _ = np.linalg.qr(raw - raw.mean(axis=0))
        raw = q * np.sqrt(400)
        emb = linear_embed(raw, 2)
        d_raw = np.linalg.norm(raw[:, None] - raw[None], axis=-1)
        d_emb = np.linalg.norm(emb[:, None] - emb[None], axis=-1)
        np.testing.assert_allclose(d_emb, d_raw, atol=1e-9)

    def test_rank_one_reconstruction(self, rng):
        t = rng.normal(size=200)
        raw = np.column_stack([t, 2 * t + 1, -t])
        model = LinearEmbedding(1).fit(raw)
        emb = model.transform(raw)
        z = (raw - model.mean_) / model.scale_
        np.testing.assert_allclose(emb @ model.components_, z, atol=1e-10)

    def test_explained_variance_matches_eigendecomposition(self, rng):
        raw = rng.normal(size=(300, 5)) @ rng.normal(size=(5, 5))
        model = LinearEmbedding(2).fit(raw)
        z = (raw - raw.mean(axis=0)) / raw.std(axis=0)
        evals = np.sort(np.linalg.eigvalsh(z.T @ z / z.shape[0]))[::-1]
        np.testing.assert_allclose(model.explained_variance_, evals[:2], rtol=0, atol=1e-8)

    def test_constant_column_dropped_with_warning(self, rng):
        raw = np.column_stack([rng.normal(size=50), np.ones(50), rng.normal(size=50)])
        with pytest.warns(UserWarning):
            emb = linear_embed(raw, 2)
        assert emb.shape == (50, 2)

    def test_d_too_large(self, rng):
        with pytest.raises(ValueError):
            linear_embed(rng.normal(size=(10, 2)), 3)
