"""Outcome oracles: a 1-D synthetic population and pooled-RCT replay.

Both expose the same small surface used by the samplers in
:mod:`taskdesign.designer`:

``density``
    population mass of every flat grid bin.
``draw(b, t, rng)``
    enrol a unit from bin ``b`` under arm ``t``; returns ``(unit, y)`` or
    ``None`` when the bin has no unit left for that arm.
``draw_population(t, rng)``
    enrol a unit drawn from the whole population; ``(unit, b, y)`` or ``None``.
``draw_feature(code, t, rng)``
    enrol a unit from a median-split feature bin; ``(unit, b, y)`` or ``None``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from .discretize import Grid, assign_bins, bin_counts, median_split_bins


class PoolExhausted(RuntimeError):
    """No (bin, arm) combination can serve another observation."""


@dataclass(frozen=True)
class SyntheticSpec:
    """Truncated-normal population on [0, 1] with a linear baseline and sigmoid uplift.

    ``uplift="u1"`` puts the large uplifts in the tail (increasing sigmoid),
    ``"u2"`` in the bulk (its mirror image).
    """

    uplift: str = "u1"
    mu: float = 0.0
    sigma: float = 0.2
    slope: float = 0.4
    height: float = 0.7
    steepness: float = 20.0
    center: float = 0.2

    def __post_init__(self):
        if self.uplift not in ("u1", "u2"):
            raise ValueError("uplift must be 'u1' or 'u2'")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def signed_steepness(self) -> float:
        return self.steepness if self.uplift == "u1" else -self.steepness

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.mu) / self.sigma

    @property
    def _norm(self) -> float:
        return float(ndtr(self._z(1.0)) - ndtr(self._z(0.0)))

    def cdf(self, x):
        x = np.clip(x, 0.0, 1.0)
        return (ndtr(self._z(x)) - ndtr(self._z(0.0))) / self._norm

    def ppf(self, q):
        lo = ndtr(self._z(0.0))
        return self.mu + self.sigma * ndtri(lo + np.asarray(q) * self._norm)

    def uplift_at(self, x):
        x = np.asarray(x, dtype=float)
        return self.height / (1.0 + np.exp(-self.signed_steepness * (x - self.center)))

    def propensity(self, x, t):
        """P(Y=1 | x, t); the treated arm is clamped to [0, 1]."""
        base = self.slope * np.asarray(x, dtype=float)
        if t == 0:
            return base
        return np.clip(base + self.uplift_at(x), 0.0, 1.0)

    @property
    def median(self) -> float:
        return float(self.ppf(0.5))


def synthetic_density(x, spec: SyntheticSpec = SyntheticSpec()):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("synthetic density is supported on [0, 1]")
    phi = np.exp(-0.5 * spec._z(x) ** 2) / math.sqrt(2 * math.pi)
    return phi / (spec.sigma * spec._norm)


def synthetic_sample_x(rng: np.random.Generator, spec: SyntheticSpec = SyntheticSpec(),
                       size=None, lo: float = 0.0, hi: float = 1.0):
    """Inverse-CDF draw from the truncated normal, optionally restricted to [lo, hi]."""
    qlo, qhi = spec.cdf(lo), spec.cdf(hi)
    q = qlo + (qhi - qlo) * rng.random(size)
    return np.clip(spec.ppf(q), lo, hi)


def synthetic_observe(x, t: int, spec: SyntheticSpec, rng: np.random.Generator) -> int:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if t not in (0, 1):
        raise ValueError("t must be 0 or 1")
    return int(rng.random() < spec.propensity(x, t))


def synthetic_grid(cells: int = 20) -> Grid:
    return Grid(np.array([0.0]), np.array([1.0]), cells)


def synthetic_bin_mass(spec: SyntheticSpec, grid: Grid) -> np.ndarray:
    edges = grid.lower[0] + grid.widths[0] * np.arange(grid.cells_per_dim + 1)
    return np.diff(spec.cdf(edges))


def true_theta_table(spec: SyntheticSpec, grid: Grid) -> np.ndarray:
    """Density-weighted average propensity per (bin, arm), by adaptive quadrature."""
    if grid.ndim != 1 or grid.lower[0] < 0 or grid.upper[0] > 1:
        raise ValueError("synthetic truth needs a 1-D grid inside [0, 1]")
    mass = synthetic_bin_mass(spec, grid)
    theta = np.full((grid.n_bins, 2), np.nan)
    for b in range(grid.n_bins):
        if mass[b] <= 0:
            continue
        lo, hi = (float(v[0]) for v in grid.bin_bounds(b))
        for t in (0, 1):
            val, _ = integrate.quad(
                lambda x: float(spec.propensity(x, t)) * float(synthetic_density(x, spec)),
                lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200,
            )
            theta[b, t] = val / mass[b]
    return theta


def true_uplift_table(spec: SyntheticSpec, grid: Grid) -> np.ndarray:
    theta = true_theta_table(spec, grid)
    return theta[:, 1] - theta[:, 0]


class SyntheticEnvironment:
    """Infinite synthetic population binned on a 1-D grid over [0, 1]."""

    def __init__(self, spec: SyntheticSpec = SyntheticSpec(), cells: int = 20):
        self.spec = spec
        self.grid = synthetic_grid(cells)
        self.density = synthetic_bin_mass(spec, self.grid)
        self.theta = true_theta_table(spec, self.grid)
        self.uplift = self.theta[:, 1] - self.theta[:, 0]
        self.edges = self.grid.lower[0] + self.grid.widths[0] * np.arange(cells + 1)
        self._cdf_edges = spec.cdf(self.edges)
        self._median = spec.median
        self._phi0 = float(ndtr(spec._z(0.0)))
        self._mass = spec._norm
        self._lo = float(self.grid.lower[0])
        self._width = float(self.grid.widths[0])
        self._cells = cells
        self.feature_codes = np.array([0, 1])

    @property
    def n_bins(self) -> int:
        return self.grid.n_bins

    @property
    def ate(self) -> float:
        return float(self.density @ self.uplift)

    def fresh(self) -> "SyntheticEnvironment":
        return self

    def _observe(self, x: float, t: int, rng) -> int:
        sp = self.spec
        prop = sp.slope * x
        if t == 1:
            prop += sp.height / (1.0 + math.exp(-sp.signed_steepness * (x - sp.center)))
            prop = min(max(prop, 0.0), 1.0)
        return int(rng.random() < prop)

    def _x_in(self, qlo: float, qhi: float, lo: float, hi: float, rng) -> float:
        q = qlo + (qhi - qlo) * rng.random()
        x = self.spec.mu + self.spec.sigma * float(ndtri(self._phi0 + q * self._mass))
        return min(max(x, lo), hi)

    def bin_of(self, x: float) -> int:
        b = int((x - self._lo) / self._width)
        return min(max(b, 0), self._cells - 1)

    def draw(self, b: int, t: int, rng):
        x = self._x_in(self._cdf_edges[b], self._cdf_edges[b + 1], self.edges[b], self.edges[b + 1], rng)
        return x, self._observe(x, t, rng)

    def draw_population(self, t: int, rng):
        x = self._x_in(0.0, 1.0, 0.0, 1.0, rng)
        return x, self.bin_of(x), self._observe(x, t, rng)

    def draw_feature(self, code: int, t: int, rng):
        # one raw feature: code 0 is x <= median, code 1 is x > median
        if code == 0:
            x = self._x_in(0.0, 0.5, 0.0, self._median, rng)
        else:
            x = self._x_in(0.5, 1.0, self._median, 1.0, rng)
        return x, self.bin_of(x), self._observe(x, t, rng)


# --------------------------------------------------------------------------
# pooled-RCT replay


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Delimited text with a header row; delimiter sniffed from the header."""
    path = Path(path)
    with path.open(newline="") as fh:
        head = fh.readline()
        try:
            dialect = csv.Sniffer().sniff(head, delimiters=",;\t ")
        except csv.Error:
            dialect = csv.excel
        fh.seek(0)
        reader = csv.reader(fh, dialect)
        header = [h.strip() for h in next(reader, [])]
        if not header:
            raise ValueError(f"{path}: missing header row")
        rows = [r for r in reader if r]
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entries") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: rows do not match the header width")
    return header, data


def read_embedding(path) -> np.ndarray:
    """Embedding file: one row per pool unit, numeric columns, optional header."""
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline()
    delim = "," if "," in first else None
    try:
        [float(v) for v in first.replace(",", " ").split()]
        skip = 0
    except ValueError:
        skip = 1
    arr = np.loadtxt(path, delimiter=delim, skiprows=skip, ndmin=2)
    return arr


@dataclass
class ReplayPool:
    """Read-only pooled RCT data with per-row grid bins and feature codes."""

    features: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    embedding: np.ndarray
    grid: Grid
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.treatment = np.asarray(self.treatment, dtype=np.int64)
        self.outcome = np.asarray(self.outcome, dtype=np.int64)
        n = self.treatment.shape[0]
        if not (self.outcome.shape[0] == n == self.embedding.shape[0] == self.features.shape[0]):
            raise ValueError("pool columns have unequal lengths")
        if not np.all(np.isin(self.treatment, (0, 1))) or not np.all(np.isin(self.outcome, (0, 1))):
            raise ValueError("treatment and outcome must be 0/1")
        self.bins = assign_bins(self.grid, self.embedding)
        self.density = bin_counts(self.grid.n_bins, self.bins) / n
        self.codes = median_split_bins(self.features)
        self.feature_codes = np.unique(self.codes)
        self._groups = {
            "bin": _group_rows(self.bins, self.treatment),
            "code": _group_rows(self.codes, self.treatment),
            "arm": _group_rows(np.zeros(n, dtype=np.int64), self.treatment),
        }

    @property
    def n_bins(self) -> int:
        return self.grid.n_bins

    def __len__(self) -> int:
        return self.treatment.shape[0]

    @classmethod
    def from_csv(cls, pool_path, grid: Grid | None = None, embedding=None,
                 cells_per_dim: int = 20, latent_dim: int = 2, embedder=None) -> "ReplayPool":
        header, data = read_table(pool_path)
        try:
            ti, yi = header.index("treatment"), header.index("outcome")
        except ValueError as exc:
            raise ValueError(f"{pool_path}: header needs 'treatment' and 'outcome' columns") from exc
        feat_cols = [i for i in range(len(header)) if i not in (ti, yi)]
        features = data[:, feat_cols]
        if embedding is None:
            from .discretize import LinearEmbedding

            embedder = embedder or LinearEmbedding(min(latent_dim, features.shape[1])).fit(features)
            embedding = embedder.transform(features)
        elif isinstance(embedding, (str, Path)):
            embedding = read_embedding(embedding)
        embedding = np.asarray(embedding, dtype=float)
        if embedding.shape[0] != data.shape[0]:
            raise ValueError("embedding rows do not match pool rows")
        if grid is None:
            from .discretize import fit_grid

            grid = fit_grid(embedding, cells_per_dim)
        else:
            embedding = np.clip(embedding, grid.lower, grid.upper)
        pool = cls(features, data[:, ti], data[:, yi], embedding, grid,
                   [header[i] for i in feat_cols])
        pool.embedder = embedder
        return pool

    def fresh(self) -> "PoolCursor":
        return PoolCursor(self)


def _group_rows(labels, treatment) -> dict:
    order = np.lexsort((np.arange(labels.size), treatment, labels))
    keys = np.stack([labels[order], treatment[order]], axis=1)
    starts = np.flatnonzero(np.r_[True, np.any(keys[1:] != keys[:-1], axis=1)])
    ends = np.r_[starts[1:], order.size]
    return {(int(keys[s, 0]), int(keys[s, 1])): order[s:e] for s, e in zip(starts, ends)}


class PoolCursor:
    """Per-trial consumption state over a shared :class:`ReplayPool`.

    Rows are drawn uniformly without replacement from the requested
    (label, arm) group.  A row consumed through one grouping is skipped
    lazily by the others.
    """

    def __init__(self, pool: ReplayPool):
        self.pool = pool
        self.density = pool.density
        self.grid = pool.grid
        self.feature_codes = pool.feature_codes
        self.consumed = np.zeros(len(pool), dtype=bool)
        self._live: dict = {}

    @property
    def n_bins(self) -> int:
        return self.pool.n_bins

    def fresh(self) -> "PoolCursor":
        return PoolCursor(self.pool)

    def _take(self, grouping: str, key: int, t: int, rng):
        slot = self._live.get((grouping, key, t))
        if slot is None:
            rows = self.pool._groups[grouping].get((key, t))
            if rows is None:
                return None
            slot = [rows.copy(), rows.size]
            self._live[(grouping, key, t)] = slot
        rows = slot[0]
        while slot[1] > 0:
            j = int(rng.integers(slot[1]))
            row = int(rows[j])
            slot[1] -= 1
            rows[j] = rows[slot[1]]
            if not self.consumed[row]:
                self.consumed[row] = True
                return row
        return None

    def draw(self, b: int, t: int, rng):
        row = self._take("bin", b, t, rng)
        if row is None:
            return None
        return row, int(self.pool.outcome[row])

    def draw_population(self, t: int, rng):
        row = self._take("arm", 0, t, rng)
        if row is None:
            return None
        return row, int(self.pool.bins[row]), int(self.pool.outcome[row])

    def draw_feature(self, code: int, t: int, rng):
        row = self._take("code", code, t, rng)
        if row is None:
            return None
        return row, int(self.pool.bins[row]), int(self.pool.outcome[row])


def pool_observe(cursor: PoolCursor, b: int, t: int, rng):
    """One unconsumed row from bin ``b`` under arm ``t``, or ``None`` if none remain."""
    return cursor.draw(b, t, rng)
