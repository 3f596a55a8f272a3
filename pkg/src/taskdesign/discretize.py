"""Rectangular grid discretization of an embedded population.

Bins are addressed either by a multi-index (one cell coordinate per
dimension) or by the row-major flattened index of that multi-index.  Most
of the package works with flat indices.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_CELLS_PER_DIM = 20


@dataclass(frozen=True, eq=False)
class Grid:
    """Axis-aligned box sliced uniformly into ``cells_per_dim`` cells per edge."""

    lower: np.ndarray
    upper: np.ndarray
    cells_per_dim: int = DEFAULT_CELLS_PER_DIM

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape or lower.size == 0:
            raise ValueError("lower and upper bounds must be nonempty and of equal length")
        if not np.all(lower < upper):
            raise ValueError("grid requires lower < upper in every dimension")
        if int(self.cells_per_dim) < 1:
            raise ValueError("cells_per_dim must be >= 1")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "cells_per_dim", int(self.cells_per_dim))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.cells_per_dim == other.cells_per_dim
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self) -> int:
        return hash((self.lower.tobytes(), self.upper.tobytes(), self.cells_per_dim))

    @property
    def ndim(self) -> int:
        return self.lower.size

    @property
    def n_bins(self) -> int:
        return self.cells_per_dim ** self.ndim

    @property
    def widths(self) -> np.ndarray:
        return (self.upper - self.lower) / self.cells_per_dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_dim,) * self.ndim

    def flatten(self, index) -> np.ndarray | int:
        """Multi-index (..., d) -> flat row-major index."""
        index = np.asarray(index)
        flat = np.ravel_multi_index(tuple(np.moveaxis(index, -1, 0)), self.shape)
        return int(flat) if np.ndim(flat) == 0 else flat

    def unflatten(self, flat) -> np.ndarray:
        return np.stack(np.unravel_index(flat, self.shape), axis=-1)

    def cell_centers(self, index) -> np.ndarray:
        index = np.asarray(index)
        return self.lower + (index + 0.5) * self.widths

    def bin_bounds(self, flat: int) -> tuple[np.ndarray, np.ndarray]:
        index = self.unflatten(flat)
        lo = self.lower + index * self.widths
        return lo, lo + self.widths

    def to_dict(self) -> dict:
        return {
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "cells_per_dim": self.cells_per_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(np.asarray(d["lower"]), np.asarray(d["upper"]), int(d["cells_per_dim"]))


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("points must be a sequence of equal-length coordinate vectors")
    return arr


def fit_grid(points, cells_per_dim: int = DEFAULT_CELLS_PER_DIM) -> Grid:
    """Smallest box containing all points, sliced into ``cells_per_dim`` cells per edge.

    A dimension where every point shares one value is widened symmetrically by
    ``max(1e-9, 1e-9 * |value|)`` so it still holds a single usable cell.
    """
    if len(points) == 0:
        raise ValueError("cannot fit a grid to an empty point set")
    try:
        arr = _as_points(points)
    except ValueError as exc:
        raise ValueError("points have inconsistent dimensions") from exc
    if cells_per_dim < 1:
        raise ValueError("cells_per_dim must be >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedded coordinates must be finite")
    lower = arr.min(axis=0)
    upper = arr.max(axis=0)
    flat = lower == upper
    if np.any(flat):
        pad = np.maximum(1e-9, 1e-9 * np.abs(lower[flat]))
        lower = lower.copy()
        upper = upper.copy()
        lower[flat] -= pad
        upper[flat] += pad
    return Grid(lower, upper, cells_per_dim)


def assign_bins(grid: Grid, points, clip: bool = False) -> np.ndarray:
    """Flat bin index for every point; vectorised form of :func:`assign_bin`.

    Upper-boundary points land in the last cell.  With ``clip=True`` points
    outside the box are first projected onto it (used for held-out test rows).
    """
    arr = _as_points(points)
    if arr.shape[1] != grid.ndim:
        raise ValueError(f"expected {grid.ndim}-dimensional points, got {arr.shape[1]}")
    if clip:
        arr = np.clip(arr, grid.lower, grid.upper)
    elif np.any(arr < grid.lower) or np.any(arr > grid.upper):
        raise ValueError("point outside grid bounds")
    idx = np.floor((arr - grid.lower) / grid.widths).astype(np.int64)
    np.clip(idx, 0, grid.cells_per_dim - 1, out=idx)
    return np.ravel_multi_index(tuple(idx.T), grid.shape)


def assign_bin(grid: Grid, point) -> tuple[int, ...]:
    """Multi-index of the cell holding ``point``."""
    flat = assign_bins(grid, np.asarray(point, dtype=float).reshape(1, -1))[0]
    return tuple(int(i) for i in grid.unflatten(flat))


def bin_counts(n_bins: int, bins) -> np.ndarray:
    return np.bincount(np.asarray(bins, dtype=np.int64), minlength=n_bins)


def bin_density(grid: Grid, points) -> np.ndarray:
    """Empirical mass ``p(b) = count(b) / total`` for every flat bin."""
    if len(points) == 0:
        raise ValueError("cannot estimate density from an empty point set")
    counts = bin_counts(grid.n_bins, assign_bins(grid, points))
    return counts / counts.sum()


def median_split_bins(raw_features) -> np.ndarray:
    """Split every column at its median; values equal to the median go low.

    Returns one integer code per row in ``[0, 2**f)``, bit ``j`` set when
    column ``j`` is above its median.
    """
    arr = np.asarray(raw_features, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.size == 0 or arr.shape[0] == 0:
        raise ValueError("median split needs a nonempty table")
    above = arr > np.median(arr, axis=0)
    weights = np.left_shift(np.int64(1), np.arange(arr.shape[1], dtype=np.int64))
    return above.astype(np.int64) @ weights


class LinearEmbedding:
    """Projection of standardised features onto their top principal directions.

    Stand-in for a learned encoder; ``fit`` drops zero-variance columns with a
    warning and ``transform`` applies the same standardisation to new rows.
    """

    def __init__(self, d: int = 2):
        self.d = d

    def fit(self, raw_features) -> "LinearEmbedding":
        arr = np.asarray(raw_features, dtype=float)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("expected a nonempty 2-D feature table")
        mean = arr.mean(axis=0)
        std = arr.std(axis=0)
        keep = std > 0
        if not np.all(keep):
            warnings.warn(
                f"dropping {int((~keep).sum())} constant column(s) before embedding",
                stacklevel=2,
            )
        if self.d > int(keep.sum()):
            raise ValueError(f"cannot embed into d={self.d} with {int(keep.sum())} usable columns")
        z = (arr[:, keep] - mean[keep]) / std[keep]
        # SVD of the standardized table gives principal directions in Vt
        _, sing, vt = np.linalg.svd(z, full_matrices=False)
        self.keep_ = keep
        self.mean_ = mean[keep]
        self.scale_ = std[keep]
        self.components_ = vt[: self.d]
        self.explained_variance_ = sing[: self.d] ** 2 / arr.shape[0]
        return self

    def transform(self, raw_features) -> np.ndarray:
        arr = np.asarray(raw_features, dtype=float)
        z = (arr[:, self.keep_] - self.mean_) / self.scale_
        return z @ self.components_.T

    def fit_transform(self, raw_features) -> np.ndarray:
        return self.fit(raw_features).transform(raw_features)


def linear_embed(raw_features, d: int) -> np.ndarray:
    """Embed a feature table into ``d`` principal coordinates."""
    arr = np.asarray(raw_features, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D feature table")
    if d > arr.shape[1]:
        raise ValueError(f"d={d} exceeds the number of columns ({arr.shape[1]})")
    return LinearEmbedding(d).fit_transform(arr)
