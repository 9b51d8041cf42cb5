"""Local-minima extraction of a KdeModel and the scale-walking threshold search.

Minima are found semi-analytically: the model's first derivative is scanned
for sign changes on an oversampled grid, each negative-to-positive crossing
is refined by bisection on the analytic derivative, and candidates are kept
only where the analytic second derivative is positive.  The threshold search
counts minima while sliding the model's variance up (smoothing minima away)
or down (revealing merged minima) until exactly ``C - 1`` remain.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import kde
from .errors import (
    CountUnreachableError,
    InvalidArgumentError,
    SearchLimitError,
    UnresolvableClustersError,
)
from .numerics import next_pow2, refine_root

#: Scan values whose magnitude is below this fraction of the scan's peak are
#: treated as numerically flat: sign flips inside such stretches are FFT
#: roundoff, not structure, and a crossing is only counted between
#: significant samples of opposite sign.
_FLAT_RTOL = 1e-13

#: Factor by which the walk step is subdivided when bisecting an overshoot.
_BISECT_DEPTH = 1024


@dataclass(frozen=True)
class MinimaSet:
    """Sorted local-minima positions of a model at some scale offset."""

    positions: np.ndarray
    scale_offset: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 1:
            raise InvalidArgumentError("positions must be one-dimensional")
        if pos.size > 1 and np.any(np.diff(pos) <= 0):
            raise InvalidArgumentError("positions must be strictly increasing")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "scale_offset", float(self.scale_offset))

    def __len__(self):
        return self.positions.size


@dataclass(frozen=True)
class ThresholdResult:
    """Thresholds resolved by the scale walk.

    ``scale_offset`` is the total variance offset (relative to the fitted
    variance) at which exactly ``C - 1`` minima exist, ``direction`` is the
    walk direction taken ("none", "coarser" or "finer"), ``steps`` the
    number of whole walk steps consumed, and ``refined`` whether bisection
    on the scale axis was needed after overshooting the target count.
    """

    thresholds: np.ndarray
    scale_offset: float
    direction: str
    steps: int
    refined: bool

    def __post_init__(self):
        thr = np.asarray(self.thresholds, dtype=float)
        if thr.ndim != 1 or thr.size < 1:
            raise InvalidArgumentError("thresholds must be a non-empty 1-D array")
        if thr.size > 1 and np.any(np.diff(thr) <= 0):
            raise InvalidArgumentError("thresholds must be strictly increasing")
        if self.direction not in ("none", "coarser", "finer"):
            raise InvalidArgumentError(f"unknown direction {self.direction!r}")
        thr.setflags(write=False)
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "scale_offset", float(self.scale_offset))
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "refined", bool(self.refined))


class _MinimaScanner:
    """Sign-change scan of the model derivative on an oversampled lattice.

    The scan grid subdivides every bin ``oversampling`` times, so its points
    lie on a lattice the component centers also lie on; the derivative at
    every grid point is then one linear convolution of the zero-stuffed
    weights with sampled derivative-kernel values, which a single FFT
    product evaluates at machine precision.  The weight transform depends
    only on the model, so rescanning at a new scale offset costs one kernel
    evaluation and two transforms.
    """

    def __init__(self, model, oversampling):
        oversampling = int(oversampling)
        if oversampling < 1:
            raise InvalidArgumentError("grid_oversampling must be at least 1")
        self.model = model
        n = len(model)
        self.n_points = (n - 1) * oversampling + 1
        self.step = model.bin_width / oversampling
        self.grid = model.centers[0] + np.arange(self.n_points) * self.step
        stuffed = np.zeros(self.n_points)
        stuffed[::oversampling] = model.weights
        self.size = next_pow2(3 * self.n_points - 2)
        self.f_weights = np.fft.rfft(stuffed, self.size)
        self.offsets = (np.arange(2 * self.n_points - 1) - (self.n_points - 1)) * self.step

    def derivative_scan(self, scale_offset):
        """First-derivative values of the shifted model on the scan grid."""
        var = self.model.variance + scale_offset
        kernel = kde.gaussian(self.offsets, 0.0, var)
        kernel *= -self.offsets / var * self.model.bin_width
        f_kernel = np.fft.rfft(kernel, self.size)
        start = self.n_points - 1
        return np.fft.irfft(self.f_weights * f_kernel, self.size)[
            start : start + self.n_points
        ]

    def brackets(self, scale_offset):
        """Index pairs (i, j) of scan samples bracketing a minimum:
        significant negative derivative at i, significant positive at j,
        nothing significant between."""
        values = self.derivative_scan(scale_offset)
        peak = np.max(np.abs(values))
        if peak == 0.0:
            return []
        significant = np.flatnonzero(np.abs(values) > _FLAT_RTOL * peak)
        if significant.size < 2:
            return []
        signs = values[significant] > 0
        crossing = ~signs[:-1] & signs[1:]
        return [
            (significant[k], significant[k + 1]) for k in np.flatnonzero(crossing)
        ]

    def count(self, scale_offset):
        return len(self.brackets(scale_offset))


def _refine_minimum(model, lo, hi, root_tol):
    """Bisection on the analytic first derivative inside a scan bracket,
    keeping the root only if the second derivative marks a minimum."""
    f = lambda x: kde.derivative1(model, x)
    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo == 0.0 and f_hi == 0.0:
        return None
    if not (f_lo < 0.0 <= f_hi or f_lo <= 0.0 < f_hi):
        # The FFT scan and the direct evaluation disagree about the signs;
        # the crossing sits below roundoff, so there is nothing to locate.
        return None
    root = refine_root(f, lo, hi, root_tol)
    if kde.derivative2(model, root) > 0.0:
        return root
    return None


def local_minima(model, grid_oversampling=10, root_tol=None):
    """All local minima of the model density, to root tolerance.

    The derivative is scanned on a grid with ``grid_oversampling`` points
    per bin spanning the component centers; every negative-to-positive sign
    change is refined by bisection on the analytic derivative and kept if
    the analytic second derivative is positive there.  Domain endpoints are
    never reported.
    """
    if root_tol is None:
        root_tol = model.bin_width * 1e-6
    scanner = _MinimaScanner(model, grid_oversampling)
    return _minima_at(scanner, model, 0.0, root_tol)


def _minima_at(scanner, base_model, scale_offset, root_tol):
    model = kde.at_scale(base_model, scale_offset) if scale_offset else base_model
    positions = []
    for i, j in scanner.brackets(scale_offset):
        root = _refine_minimum(model, scanner.grid[i], scanner.grid[j], root_tol)
        if root is not None:
            positions.append(root)
    return MinimaSet(np.array(sorted(positions)), scale_offset)


def detect_thresholds(
    model,
    n_classes,
    dsigma2_step,
    max_steps=10000,
    grid_oversampling=10,
    root_tol=None,
    trace_path=None,
):
    """Walk the model through scale-space until it has ``n_classes - 1``
    local minima; those minima are the thresholds.

    If the base-scale model already has the right count the walk ends
    immediately.  With too many minima the variance offset is raised in
    steps of ``dsigma2_step`` (smoothing); with too few it is lowered
    (sharpening), subject to the variance staying positive.  If one step
    jumps past the target count, the offset interval between the last two
    steps is bisected down to ``dsigma2_step / 1024`` looking for a scale
    with the exact count.  The first matching scale encountered walking
    away from offset zero is returned.

    ``dsigma2_step`` should stay below the bin width so that no minima pair
    can appear and vanish between consecutive scales unseen.
    """
    n_classes = int(n_classes)
    if n_classes < 2:
        raise InvalidArgumentError(f"need at least 2 classes, got {n_classes}")
    step = float(dsigma2_step)
    if not step > 0:
        raise InvalidArgumentError(f"dsigma2_step must be positive, got {step}")
    max_steps = int(max_steps)
    if max_steps < 1:
        raise InvalidArgumentError("max_steps must be at least 1")
    if root_tol is None:
        root_tol = model.bin_width * 1e-6
    target = n_classes - 1

    scanner = _MinimaScanner(model, grid_oversampling)
    trace = [] if trace_path is not None else None

    def finish(offset, direction, steps, refined):
        minima = _minima_at(scanner, model, offset, root_tol)
        if trace is not None:
            _write_walk_trace(trace_path, trace)
        if len(minima) != target:
            # Refinement demoted a scan crossing (flat saddle); treat like a
            # failed bisection rather than returning a wrong count.
            raise CountUnreachableError(
                f"scale offset {offset} has {len(minima)} refined minima, "
                f"expected {target}",
                nearest_counts=(len(minima), len(minima)),
            )
        return ThresholdResult(minima.positions, offset, direction, steps, refined)

    count0 = scanner.count(0.0)
    if trace is not None:
        trace.append((0, 0.0, count0))
    if count0 == target:
        return finish(0.0, "none", 0, False)

    direction = "coarser" if count0 > target else "finer"
    sign = 1.0 if direction == "coarser" else -1.0

    def bisect(lo_off, hi_off, lo_count, hi_count, steps_taken):
        # Invariant: lo_off is on the starting side of the target count,
        # hi_off on the far side; both counts differ from the target.
        lo_side = lo_count > target
        width_limit = step / _BISECT_DEPTH
        while abs(hi_off - lo_off) > width_limit:
            mid = 0.5 * (lo_off + hi_off)
            count_mid = scanner.count(mid)
            if trace is not None:
                trace.append((steps_taken, mid, count_mid))
            if count_mid == target:
                return finish(mid, direction, steps_taken, True)
            if (count_mid > target) == lo_side:
                lo_off, lo_count = mid, count_mid
            else:
                hi_off, hi_count = mid, count_mid
        if trace is not None:
            _write_walk_trace(trace_path, trace)
        raise CountUnreachableError(
            f"no scale with exactly {target} minima between offsets "
            f"{lo_off} ({lo_count} minima) and {hi_off} ({hi_count} minima)",
            nearest_counts=(lo_count, hi_count),
        )

    prev_offset, prev_count = 0.0, count0
    for k in range(1, max_steps + 1):
        offset = sign * k * step
        if direction == "finer" and model.variance + offset <= 0:
            if trace is not None:
                _write_walk_trace(trace_path, trace)
            raise UnresolvableClustersError(
                f"variance underflow at offset {offset} before reaching "
                f"{target} minima (last count {prev_count} at offset {prev_offset})"
            )
        count = scanner.count(offset)
        if trace is not None:
            trace.append((k, offset, count))
        if count == target:
            return finish(offset, direction, k, False)
        if (count > target) != (prev_count > target):
            return bisect(prev_offset, offset, prev_count, count, k)
        prev_offset, prev_count = offset, count
    if trace is not None:
        _write_walk_trace(trace_path, trace)
    raise SearchLimitError(
        f"no scale with {target} minima within {max_steps} steps of {sign * step} "
        f"(last count {prev_count} at offset {prev_offset})"
    )


def _write_walk_trace(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "scale_offset", "minima_count"])
        for step_idx, offset, count in rows:
            writer.writerow([step_idx, repr(float(offset)), count])
