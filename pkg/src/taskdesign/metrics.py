"""Evaluation of the binned uplift model: Qini/AUQ, ERUPT, MSE and ATE error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class UpliftModel:
    """Per-bin predicted uplift; ``observed`` marks bins with at least one record."""

    uplift: np.ndarray
    observed: np.ndarray

    def predict(self, bins) -> np.ndarray:
        return self.uplift[np.asarray(bins, dtype=np.int64)]

    def to_dict(self) -> dict:
        return {"uplift": self.uplift.tolist(), "observed": self.observed.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "UpliftModel":
        return cls(np.asarray(d["uplift"], dtype=float), np.asarray(d["observed"], dtype=bool))


def record_counts(records, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-(bin, arm) observation and success counts."""
    n = np.zeros((n_bins, 2), dtype=np.int64)
    s = np.zeros((n_bins, 2), dtype=np.int64)
    if len(records):
        b = np.fromiter((r.bin for r in records), dtype=np.int64, count=len(records))
        t = np.fromiter((r.t for r in records), dtype=np.int64, count=len(records))
        y = np.fromiter((r.y for r in records), dtype=np.int64, count=len(records))
        np.add.at(n, (b, t), 1)
        np.add.at(s, (b, t), y)
    return n, s


def fit_uplift_model(records, n_bins: int, alpha=0.0, beta=0.0) -> UpliftModel:
    """Difference of posterior-predictive arm means per bin.

    ``alpha`` and ``beta`` are scalars or ``(n_bins, 2)`` prior tables.  An
    arm with ``alpha + beta + n = 0`` predicts 0, so a bin with no data
    predicts zero uplift.
    """
    n, s = record_counts(records, n_bins)
    den = alpha + beta + n
    means = np.divide(alpha + s, den, out=np.zeros((n_bins, 2)), where=den > 0)
    return UpliftModel(means[:, 1] - means[:, 0], n.sum(axis=1) > 0)


@dataclass
class TestSet:
    """RCT rows: flat bin, arm and outcome per row."""

    bins: np.ndarray
    t: np.ndarray
    y: np.ndarray

    __test__ = False

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.int64)
        self.t = np.asarray(self.t, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=float)
        if not (self.bins.shape == self.t.shape == self.y.shape):
            raise ValueError("test columns have unequal lengths")
        if not (np.any(self.t == 1) and np.any(self.t == 0)):
            raise ValueError("test set needs both arms")

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def ate(self) -> float:
        """Difference of empirical arm means."""
        return float(self.y[self.t == 1].mean() - self.y[self.t == 0].mean())

    def resample(self, rng: np.random.Generator) -> "TestSet":
        idx = rng.integers(len(self), size=len(self))
        return TestSet(self.bins[idx], self.t[idx], self.y[idx])


@dataclass
class QiniCurve:
    f: np.ndarray
    q: np.ndarray

    def to_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.f.tolist(), self.q.tolist()))


def qini_curve(test: TestSet, model: UpliftModel, m: int = 100) -> QiniCurve:
    """Qini curve at ``m`` evenly spaced population fractions.

    Rows are ranked by descending predicted uplift; unobserved bins rank
    after observed ones at equal prediction, then original row order.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    uhat = model.predict(test.bins)
    unobserved = ~model.observed[test.bins]
    order = np.lexsort((np.arange(len(test)), unobserved, -uhat))
    t = test.t[order]
    y = test.y[order]
    n1 = np.cumsum(t)
    n0 = np.cumsum(1 - t)
    y1 = np.cumsum(t * y)
    y0 = np.cumsum((1 - t) * y)
    f = np.arange(m + 1) / m
    q = np.zeros(m + 1)
    n = len(test)
    for i in range(1, m + 1):
        k = (n * i) // m
        if k == 0 or n1[k - 1] == 0 or n0[k - 1] == 0:
            raise ValueError(f"top {k} rows do not contain both arms")
        q[i] = (y1[k - 1] / n1[k - 1] - y0[k - 1] / n0[k - 1]) * i / m
    return QiniCurve(f, q)


def auq(curve: QiniCurve, ate: float) -> float:
    """Trapezoid area under the curve minus the random-ranking triangle."""
    area = float(np.sum(np.diff(curve.f) * (curve.q[1:] + curve.q[:-1]) / 2.0))
    return area - ate / 2.0


def erupt_estimate(test: TestSet, model: UpliftModel, c: float, relative: bool = True) -> float:
    """Inverse-propensity estimate of realised uplift minus cost over proposed treatments.

    Treatment is proposed where the predicted uplift exceeds ``c``.  The
    response under the proposal is reweighted by empirical arm rates.  With
    ``relative=True`` the never-treat response is subtracted, so never
    treating scores exactly 0 and a random proposal at ``c = ATE`` breaks
    even in expectation; ``relative=False`` returns the raw response.
    """
    propose = (model.predict(test.bins) > c).astype(np.int64)
    n = len(test)
    pi = np.array([np.mean(test.t == 0), np.mean(test.t == 1)])
    matched = test.t == propose
    response = np.sum((test.y[matched] - c * propose[matched]) / pi[test.t[matched]]) / n
    if not relative:
        return float(response)
    baseline = np.sum(test.y[test.t == 0]) / (n * pi[0])
    return float(response - baseline)


def mse_metric(model: UpliftModel, truth, density) -> float:
    """Density-weighted squared error of the per-bin uplift."""
    truth = np.asarray(truth, dtype=float)
    density = np.asarray(density, dtype=float)
    if truth.shape != model.uplift.shape:
        raise ValueError("truth must give one uplift per bin")
    live = density > 0
    if np.any(np.isnan(truth[live])):
        raise ValueError("missing truth for a populated bin")
    err = model.uplift[live] - truth[live]
    return float(np.sum(density[live] * err * err))


def ate_hat(records, density) -> float:
    """Density-weighted sum of per-bin empirical uplifts.

    Bins lacking either arm are skipped and the remaining density renormalised.
    """
    density = np.asarray(density, dtype=float)
    n, s = record_counts(records, density.shape[0])
    ok = np.all(n > 0, axis=1) & (density > 0)
    if not np.any(ok):
        raise ValueError("no bin has observations in both arms")
    rates = s[ok] / n[ok]
    w = density[ok] / density[ok].sum()
    return float(np.sum(w * (rates[:, 1] - rates[:, 0])))


def ate_sq_error(estimate: float, test: TestSet | float) -> float:
    ref = test.ate if isinstance(test, TestSet) else float(test)
    return float((estimate - ref) ** 2)


# population-level versions for a synthetic truth


def population_qini_area(uhat, truth, density, observed=None) -> float:
    """Exact AUQ of a bin-constant model on a population with known bin uplifts.

    Bins that tie on the ranking key are mixed uniformly, so the curve is
    linear across the tie group with the group's mean uplift as slope.
    """
    uhat = np.asarray(uhat, dtype=float)
    truth = np.asarray(truth, dtype=float)
    density = np.asarray(density, dtype=float)
    live = np.flatnonzero(density > 0)
    unobs = np.zeros(uhat.shape, dtype=bool) if observed is None else ~np.asarray(observed)
    order = live[np.lexsort((unobs[live], -uhat[live]))]
    area = 0.0
    q = 0.0
    i = 0
    while i < order.size:
        j = i + 1
        key = (uhat[order[i]], unobs[order[i]])
        while j < order.size and (uhat[order[j]], unobs[order[j]]) == key:
            j += 1
        group = order[i:j]
        width = density[group].sum()
        rise = float(np.dot(density[group], truth[group]))
        area += width * q + 0.5 * width * rise
        q += rise
        i = j
    ate = float(np.dot(density[live], truth[live]))
    return area - ate / 2.0


def population_erupt(uhat, truth, density, c: float) -> float:
    uhat = np.asarray(uhat, dtype=float)
    density = np.asarray(density, dtype=float)
    live = density > 0
    treat = uhat[live] > c
    return float(np.sum(density[live][treat] * (np.asarray(truth)[live][treat] - c)))
