"""Time averages with burn-in, histograms and the error metrics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats


class InsufficientDataError(ValueError):
    """Fewer usable points than an estimator needs."""


def burn_in_steps(total_steps: int, fraction: float) -> int:
    """Number of leading samples discarded, ``floor(fraction * total)``."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"burn-in fraction must be in [0, 1), got {fraction}")
    return int(math.floor(fraction * total_steps))


class RunningAverage:
    """Welford mean/variance, vectorised over a leading batch shape.

    ``push(x)`` adds one sample per replica. When ``total_steps`` is known,
    the first ``floor(burn_in_fraction * total_steps)`` pushes are discarded.
    """

    def __init__(self, shape=(), burn_in_fraction: float = 0.0, total_steps: int | None = None):
        self.shape = (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)
        self.burn_in_fraction = float(burn_in_fraction)
        self.skip = burn_in_steps(total_steps, burn_in_fraction) if total_steps is not None else 0
        self.seen = 0
        self.count = 0
        self.mean = np.zeros(self.shape)
        self.m2 = np.zeros(self.shape)

    def push(self, x) -> None:
        self.seen += 1
        if self.seen <= self.skip:
            return
        x = np.asarray(x, dtype=float)
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    def extend(self, xs: Iterable) -> None:
        for x in xs:
            self.push(x)

    @property
    def variance(self) -> np.ndarray:
        """Sample variance (``ddof = 1``); NaN with fewer than two samples."""
        if self.count < 2:
            return np.full(self.shape, np.nan)
        return self.m2 / (self.count - 1)


class Histogram:
    """Fixed-bin histogram on ``[lo, hi)`` with an explicit out-of-range tally."""

    def __init__(self, bin_count: int = 100, range: tuple[float, float] = (0.0, 1.0)):
        lo, hi = map(float, range)
        if bin_count < 1 or not hi > lo:
            raise ValueError("need bin_count >= 1 and range[1] > range[0]")
        self.bin_count = int(bin_count)
        self.range = (lo, hi)
        self.edges = np.linspace(lo, hi, self.bin_count + 1)
        self.counts = np.zeros(self.bin_count, dtype=np.int64)
        self.out_of_range = 0

    @classmethod
    def from_counts(cls, counts, range, out_of_range: int = 0) -> Histogram:
        counts = np.asarray(counts, dtype=np.int64)
        hist = cls(counts.size, range)
        hist.counts += counts
        hist.out_of_range = int(out_of_range)
        return hist

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.out_of_range

    def add(self, samples) -> None:
        x = np.asarray(samples, dtype=float).ravel()
        lo, hi = self.range
        inside = (x >= lo) & (x < hi)
        self.out_of_range += int(x.size - inside.sum())
        idx = np.floor((x[inside] - lo) / (hi - lo) * self.bin_count).astype(np.int64)
        np.clip(idx, 0, self.bin_count - 1, out=idx)
        self.counts += np.bincount(idx, minlength=self.bin_count)

    def merge(self, other: Histogram) -> None:
        if other.bin_count != self.bin_count or other.range != self.range:
            raise ValueError("histograms have different binning")
        self.counts += other.counts
        self.out_of_range += other.out_of_range

    def frequencies(self) -> np.ndarray:
        """In-range counts normalised to sum to one (zeros if empty)."""
        n = self.counts.sum()
        return self.counts / n if n else np.zeros(self.bin_count)

    def normal_bin_masses(self, mean: float, std: float) -> np.ndarray:
        """Exact bin masses of ``N(mean, std^2)`` restricted to the range and renormalised."""
        return bin_masses(self.edges, lambda e: stats.norm.cdf(e, loc=mean, scale=std))


def bin_masses(edges, cdf: Callable) -> np.ndarray:
    c = np.asarray(cdf(np.asarray(edges, dtype=float)), dtype=float)
    masses = np.diff(c)
    return masses / masses.sum()


def relative_error(observed, exact):
    """``|observed - exact| / |exact|``; falls back to the absolute error when ``exact == 0``."""
    observed = float(observed)
    exact = float(exact)
    if exact == 0.0:
        warnings.warn("exact value is zero; reporting absolute error", RuntimeWarning, stacklevel=2)
        return abs(observed)
    return abs(observed - exact) / abs(exact)


def mae(hist: Histogram | None, exact) -> float:
    """Mean absolute deviation of bin frequencies from exact bin masses.

    ``exact`` is either an array of bin masses or a CDF callable. A missing
    or empty histogram (diverged run) scores 1.0.
    """
    if hist is None or hist.counts.sum() == 0:
        return 1.0
    omega_hat = np.asarray(exact, dtype=float) if not callable(exact) else bin_masses(hist.edges, exact)
    if omega_hat.shape != (hist.bin_count,):
        raise ValueError(f"need {hist.bin_count} exact bin masses, got shape {omega_hat.shape}")
    return float(np.mean(np.abs(hist.frequencies() - omega_hat)))


def rmse(estimates, truth) -> float:
    """``sqrt(mean_runs |estimate - truth|^2)``; estimates have runs on the first axis."""
    e = np.asarray(estimates, dtype=float)
    t = np.asarray(truth, dtype=float)
    if e.ndim == 0 or e.shape[0] < 1:
        raise ValueError("need at least one run")
    err = (e - t).reshape(e.shape[0], -1)
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))


@dataclass(frozen=True)
class OrderFit:
    slope: float
    stderr: float
    intercept: float
    n_points: int

    def half_width(self, z: float = 1.96) -> float:
        return z * self.stderr


def fit_order(points: Sequence[tuple[float, float | None]], min_points: int = 4) -> OrderFit:
    """Least-squares slope of ``log(error)`` against ``log(h)``.

    Points whose error is None or non-finite (unstable cells) are dropped;
    non-positive finite errors are rejected.
    """
    usable = [(float(h), float(e)) for h, e in points if e is not None and np.isfinite(e)]
    if any(e <= 0 for _, e in usable):
        raise ValueError("errors must be positive for a log-log fit")
    if len(usable) < min_points:
        raise InsufficientDataError(f"need at least {min_points} stable points, got {len(usable)}")
    x = np.log([h for h, _ in usable])
    y = np.log([e for _, e in usable])
    res = stats.linregress(x, y)
    return OrderFit(float(res.slope), float(res.stderr), float(res.intercept), len(usable))


def stepsize_sweep(h0: float, growth: float, count: int) -> np.ndarray:
    """Geometric grid ``h0 * growth**k`` for ``k = 0..count-1``."""
    if not h0 > 0 or not growth > 1 or count < 1:
        raise ValueError("need h0 > 0, growth > 1 and count >= 1")
    return h0 * growth ** np.arange(count)
