"""Log-binned empirical distributions and Kolmogorov-Smirnov style metrics.

Probability samples are folded into geometric bins between ``lo`` and
``hi``. Values below ``lo`` (including exact zeros, counted separately)
land in an underflow counter that forms the lower plateau of the
empirical CDF but carries no density.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import DomainError

DEFAULT_BINS = 10_000
DEFAULT_LO = 1e-20
DEFAULT_HI = 1.0


def log_bins(m_prime: int = DEFAULT_BINS, lo: float = DEFAULT_LO, hi: float = DEFAULT_HI) -> np.ndarray:
    """``m_prime + 1`` geometrically spaced edges from ``lo`` to ``hi``."""
    if not (0 < lo < hi) or not math.isfinite(hi):
        raise DomainError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    if int(m_prime) != m_prime or m_prime < 2:
        raise DomainError(f"need at least two bins, got {m_prime}")
    edges = np.logspace(math.log10(lo), math.log10(hi), int(m_prime) + 1)
    edges[0], edges[-1] = lo, hi
    return edges


@dataclass
class BinnedHistogram:
    """Counts over ``edges`` plus under/overflow bookkeeping.

    ``underflow`` counts every sample below the first edge; ``zeros`` is
    the subset of those that were exactly zero.
    """

    edges: np.ndarray
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0
    zeros: int = 0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.edges.ndim != 1 or len(self.edges) < 2 or np.any(np.diff(self.edges) <= 0):
            raise DomainError("edges must be strictly increasing with at least two entries")
        if self.counts.shape != (len(self.edges) - 1,):
            raise DomainError("need one count per bin")

    @property
    def m_total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    @property
    def num_bins(self) -> int:
        return len(self.counts)

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])

    @property
    def width(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        """Geometric bin midpoints (arithmetic when an edge is not positive)."""
        left, right = self.edges[:-1], self.edges[1:]
        if left[0] > 0:
            return np.sqrt(left * right)
        return (left + right) / 2

    @property
    def mass(self) -> np.ndarray:
        total = self.m_total
        return self.counts / total if total else np.zeros(self.num_bins)

    @property
    def density(self) -> np.ndarray:
        return self.mass / self.width

    @property
    def underflow_fraction(self) -> float:
        return self.underflow / self.m_total if self.m_total else 0.0

    @property
    def overflow_fraction(self) -> float:
        return self.overflow / self.m_total if self.m_total else 0.0

    @property
    def cumulative(self) -> np.ndarray:
        """Prefix sums of mass; the last entry is 1 minus the overflow fraction."""
        if not self.m_total:
            return np.zeros(self.num_bins)
        return (self.underflow + np.cumsum(self.counts)) / self.m_total

    def merge(self, other: "BinnedHistogram") -> "BinnedHistogram":
        if not np.array_equal(self.edges, other.edges):
            raise DomainError("cannot merge histograms with different edges")
        return BinnedHistogram(
            self.edges,
            self.counts + other.counts,
            self.underflow + other.underflow,
            self.overflow + other.overflow,
            self.zeros + other.zeros,
        )

    def to_json(self) -> dict:
        return {
            "edges": self.edges.tolist(),
            "counts": self.counts.tolist(),
            "mass": self.mass.tolist(),
            "underflow": self.underflow,
            "zeros": self.zeros,
            "overflow": self.overflow,
            "m_total": self.m_total,
        }

    @classmethod
    def from_json(cls, data: dict) -> "BinnedHistogram":
        edges = data["edges"]
        if "counts" in data:
            counts = data["counts"]
        else:
            # mass-only payloads: recover counts from the stored total
            counts = np.rint(np.asarray(data["mass"]) * data["m_total"]).astype(np.int64)
        return cls(edges, counts, int(data.get("underflow", 0)), int(data.get("overflow", 0)),
                   int(data.get("zeros", 0)))

    def write_json(self, path, extra: Optional[dict] = None) -> None:
        payload = dict(extra or {})
        payload.update(self.to_json())
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read_json(cls, path) -> "BinnedHistogram":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["left_edge", "right_edge", "mass", "density", "cumulative"])
            rows = zip(self.edges[:-1], self.edges[1:], self.mass, self.density, self.cumulative)
            for row in rows:
                writer.writerow([repr(float(v)) for v in row])


def bin_samples(samples, edges) -> BinnedHistogram:
    """Fold samples into ``[edge_i, edge_{i+1})`` bins; the last bin is closed."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    edges = np.asarray(edges, dtype=float)
    if x.size == 0:
        raise DomainError("need at least one sample")
    if np.any(np.isnan(x)):
        raise DomainError("samples contain NaN")
    lo, hi = edges[0], edges[-1]
    below = x < lo
    above = x > hi
    inside = x[~below & ~above]
    idx = np.searchsorted(edges, inside, side="right") - 1
    idx = np.minimum(idx, len(edges) - 2)  # x == hi goes to the last bin
    counts = np.bincount(idx, minlength=len(edges) - 1)
    return BinnedHistogram(edges, counts, int(below.sum()), int(above.sum()), int((x == 0).sum()))


def empirical_cdf(hist: BinnedHistogram, x):
    """Right-continuous step CDF jumping by each bin's mass at its left edge."""
    arr = np.asarray(x, dtype=float)
    cum = hist.cumulative
    idx = np.searchsorted(hist.edges, arr, side="right") - 1
    inner = np.clip(idx, 0, hist.num_bins - 1)
    out = np.where(idx < 0, hist.underflow_fraction, cum[inner])
    out = np.where(arr >= hist.hi, 1.0, out)
    return float(out) if out.ndim == 0 else out


def _edge_values(hist: BinnedHistogram, cdf: Callable):
    try:
        f = np.asarray(cdf(hist.edges), dtype=float)
    except (TypeError, ValueError):
        f = None
    if f is None or f.shape != hist.edges.shape:
        f = np.asarray([cdf(float(e)) for e in hist.edges], dtype=float)
    # F~ is constant on [x_i, x_{i+1}) and equals the running cumulative mass
    return f, hist.cumulative


def ks_metric(hist: BinnedHistogram, cdf: Callable) -> float:
    """Empirical KS upper bound: max_i |F~(x_i) - F(x_i)| + |F(x_{i+1}) - F(x_i)|.

    ``x_i`` runs over the left bin edges and the final ``x_{i+1}`` is the
    upper edge of the histogram domain.
    """
    f, f_tilde = _edge_values(hist, cdf)
    terms = np.abs(f_tilde - f[:-1]) + np.abs(f[1:] - f[:-1])
    return float(terms.max())


def classical_ks_binned(hist: BinnedHistogram, cdf: Callable) -> float:
    """sup_x |F~(x) - F(x)| over the binned domain for a continuous monotone F."""
    f, f_tilde = _edge_values(hist, cdf)
    return float(np.maximum(np.abs(f_tilde - f[:-1]), np.abs(f_tilde - f[1:])).max())


def classical_ks(samples, cdf: Callable) -> float:
    """Two-sided KS distance between raw samples and a vectorized CDF."""
    return float(stats.kstest(np.asarray(samples, dtype=float), cdf).statistic)


def chebyshev_samples(eps, delta) -> int:
    """Sample count ceil((1 / (2 delta eps))^2) from Chebyshev's inequality.

    Decimal inputs are read exactly, so (0.1, 0.1) gives 2500 rather than
    2501 from binary rounding.
    """
    e, d = _exact(eps), _exact(delta)
    if not (0 < e < 1 and 0 < d < 1):
        raise DomainError(f"eps and delta must lie in (0, 1), got {eps}, {delta}")
    return math.ceil(1 / (2 * d * e) ** 2)


def _exact(value) -> Fraction:
    return Fraction(repr(value)) if isinstance(value, float) else Fraction(value)


def rebin(hist: BinnedHistogram, factor: int) -> BinnedHistogram:
    """Merge each run of ``factor`` consecutive bins (a ragged tail is kept)."""
    if factor < 1:
        raise DomainError("factor must be positive")
    starts = np.arange(0, hist.num_bins, factor)
    edges = np.append(hist.edges[starts], hist.edges[-1])
    counts = np.add.reduceat(hist.counts, starts)
    return BinnedHistogram(edges, counts, hist.underflow, hist.overflow, hist.zeros)


def count_modes(values, trough_ratio: float = 0.5) -> int:
    """Number of peaks in ``values`` separated by deep troughs.

    Two neighbouring peaks count separately only when the lowest value
    between them is below ``trough_ratio`` times the smaller peak;
    otherwise the lower one is absorbed into the higher.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0 or not np.any(v > 0):
        return 0
    # local maxima, treating plateaus as one peak at their first index
    padded = np.concatenate([[-np.inf], v, [-np.inf]])
    peaks = []
    i = 1
    while i <= v.size:
        j = i
        while j < v.size and padded[j + 1] == padded[i]:
            j += 1
        if padded[i] > padded[i - 1] and padded[i] > padded[j + 1]:
            peaks.append(i - 1)
        i = j + 1
    merged = True
    while merged and len(peaks) > 1:
        merged = False
        for a in range(len(peaks) - 1):
            p, q = peaks[a], peaks[a + 1]
            trough = v[p : q + 1].min()
            if trough >= trough_ratio * min(v[p], v[q]):
                peaks.pop(a + 1 if v[p] >= v[q] else a)
                merged = True
                break
    return len(peaks)
