"""Uniform-bin normalized histograms: construction, normalization, CSV round-trip.

The normalization convention throughout the package is that a histogram is a
density on its bins: ``bin_width * sum(densities) == 1``.  Bins are centered,
i.e. bin ``i`` covers the half-open interval
``[centers[i] - bin_width/2, centers[i] + bin_width/2)``.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EmptyHistogramError, FormatError, InvalidArgumentError

#: Construction-time tolerances on the type invariants.
SPACING_RTOL = 1e-9
MASS_ATOL = 1e-9

#: CSV reading is more forgiving: spacing may be off by 1e-6 relative, and a
#: total mass off by more than 1e-6 is renormalized with a warning.
CSV_SPACING_RTOL = 1e-6
CSV_MASS_WARN = 1e-6


@dataclass(frozen=True)
class Histogram:
    """Normalized histogram on a uniform grid of bin centers.

    Attributes
    ----------
    centers : ndarray, shape (N,)
        Ascending, uniformly spaced bin centers.
    densities : ndarray, shape (N,)
        Non-negative densities with ``bin_width * densities.sum() == 1``.
    bin_width : float
        Common width of all bins.
    """

    centers: np.ndarray
    densities: np.ndarray
    bin_width: float

    def __post_init__(self):
        t = np.asarray(self.centers, dtype=float)
        h = np.asarray(self.densities, dtype=float)
        dt = float(self.bin_width)
        if t.ndim != 1 or h.ndim != 1 or t.shape != h.shape:
            raise InvalidArgumentError("centers and densities must be equal-length 1-D arrays")
        if t.size < 2:
            raise InvalidArgumentError("a histogram needs at least 2 bins")
        if not (np.isfinite(t).all() and np.isfinite(h).all()):
            raise InvalidArgumentError("histogram fields must be finite")
        if not dt > 0:
            raise InvalidArgumentError(f"bin width must be positive, got {dt}")
        steps = np.diff(t)
        if np.any(np.abs(steps - dt) > SPACING_RTOL * dt):
            raise InvalidArgumentError("bin centers are not uniformly spaced")
        if np.any(h < 0):
            raise InvalidArgumentError("densities must be non-negative")
        mass = dt * h.sum()
        if abs(mass - 1.0) > MASS_ATOL:
            raise InvalidArgumentError(
                f"histogram is not normalized: bin_width * sum(densities) = {mass!r}"
            )
        t.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "centers", t)
        object.__setattr__(self, "densities", h)
        object.__setattr__(self, "bin_width", dt)

    def __len__(self):
        return self.centers.size


def from_samples(samples, lo, hi, n_bins):
    """Bin samples on a uniform grid over ``[lo, hi)`` and normalize.

    Samples outside ``[lo, hi)`` are discarded; the densities of the kept
    samples are scaled so the histogram integrates to one.

    Parameters
    ----------
    samples : array_like
        Real sample values.
    lo, hi : float
        Range of the grid, ``hi > lo``.
    n_bins : int
        Number of uniform bins, at least 2.

    Returns
    -------
    Histogram
    """
    if not hi > lo:
        raise InvalidArgumentError(f"need hi > lo, got [{lo}, {hi})")
    n_bins = int(n_bins)
    if n_bins < 2:
        raise InvalidArgumentError(f"need n_bins >= 2, got {n_bins}")
    x = np.asarray(samples, dtype=float).ravel()
    dt = (hi - lo) / n_bins
    kept = x[(x >= lo) & (x < hi)]
    if kept.size == 0:
        raise EmptyHistogramError(f"no samples inside [{lo}, {hi})")
    idx = np.floor((kept - lo) / dt).astype(np.intp)
    # Guard against top-edge float rounding: a sample just below `hi` may
    # divide out to exactly n_bins.
    np.clip(idx, 0, n_bins - 1, out=idx)
    counts = np.bincount(idx, minlength=n_bins).astype(float)
    centers = lo + (np.arange(n_bins) + 0.5) * dt
    return Histogram(centers, counts / (kept.size * dt), dt)


def normalize(raw_counts, lo, hi):
    """Turn raw non-negative bin counts over ``[lo, hi)`` into a Histogram."""
    raw = np.asarray(raw_counts, dtype=float).ravel()
    if raw.size < 2:
        raise InvalidArgumentError("need at least 2 bins")
    if not hi > lo:
        raise InvalidArgumentError(f"need hi > lo, got [{lo}, {hi})")
    if not np.isfinite(raw).all() or np.any(raw < 0):
        raise InvalidArgumentError("raw counts must be finite and non-negative")
    total = raw.sum()
    if total <= 0:
        raise EmptyHistogramError("all counts are zero")
    dt = (hi - lo) / raw.size
    centers = lo + (np.arange(raw.size) + 0.5) * dt
    return Histogram(centers, raw / (total * dt), dt)


def from_density(pdf, lo, hi, n_bins):
    """Histogram a deterministic density: evaluate ``pdf`` at the bin centers
    of a uniform grid over ``[lo, hi)`` and renormalize.

    Useful for building noise-free test histograms from analytic mixtures.
    """
    if not hi > lo:
        raise InvalidArgumentError(f"need hi > lo, got [{lo}, {hi})")
    n_bins = int(n_bins)
    if n_bins < 2:
        raise InvalidArgumentError(f"need n_bins >= 2, got {n_bins}")
    dt = (hi - lo) / n_bins
    centers = lo + (np.arange(n_bins) + 0.5) * dt
    values = np.asarray(pdf(centers), dtype=float)
    return normalize(values, lo, hi)


def write_csv(hist, path):
    """Write a histogram as two-column CSV ``t,h`` (shortest round-trip reprs)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "h"])
        for t, h in zip(hist.centers, hist.densities):
            writer.writerow([repr(float(t)), repr(float(h))])


def read_csv(path):
    """Read a two-column ``t,h`` CSV back into a Histogram.

    Validates ascending uniform spacing (within 1e-6 relative) and
    non-negative densities.  If the total mass deviates from 1 by more than
    1e-6 the densities are renormalized and a warning is emitted; smaller
    deviations are corrected silently so that a freshly written file
    round-trips without modification.
    """
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if [col.strip() for col in header] != ["t", "h"]:
            raise FormatError(f"{path}: expected header 't,h', got {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric value {row!r}") from None
    if len(rows) < 2:
        raise FormatError(f"{path}: need at least 2 rows")
    t = np.array([r[0] for r in rows])
    h = np.array([r[1] for r in rows])
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise FormatError(f"{path}: bin centers must be strictly ascending")
    dt = (t[-1] - t[0]) / (t.size - 1)
    if np.any(np.abs(steps - dt) > CSV_SPACING_RTOL * dt):
        raise FormatError(f"{path}: bin centers are not uniformly spaced")
    if np.any(h < 0):
        raise FormatError(f"{path}: negative densities")
    mass = dt * h.sum()
    if mass <= 0:
        raise FormatError(f"{path}: zero total mass")
    if abs(mass - 1.0) > CSV_MASS_WARN:
        warnings.warn(
            f"{path}: histogram mass is {mass!r}, renormalizing to 1", stacklevel=2
        )
        h = h / mass
    elif abs(mass - 1.0) > 1e-12:
        h = h / mass
    return Histogram(t, h, dt)
