"""Gaussian kernel-density model of a histogram and its EM deconvolution fit.

The model places one Gaussian of shared variance at every bin center::

    model(t) = sum_j weights[j] * N(t; centers[j], variance) * bin_width

Fitting recovers the weights (and optionally the shared variance) from a
histogram by multiplicative Richardson-Lucy/EM iterations carried out with
FFT convolutions.  Because the kernel is Gaussian, the fitted model can be
moved through scale-space in closed form by adding an offset to its
variance (``at_scale``), including negative offsets that sharpen it.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError, ScaleUnderflowError
from .numerics import next_pow2

_SQRT_TWO_PI = np.sqrt(2.0 * np.pi)

#: Chunk size (evaluation points) for dense model evaluation; bounds the
#: temporary (chunk x n_components) matrix.
_EVAL_CHUNK = 1024


def gaussian(t, mu, var):
    """Normal density ``N(t; mu, var)``; broadcasts over array ``t``."""
    if not var > 0:
        raise InvalidArgumentError(f"variance must be positive, got {var}")
    t = np.asarray(t, dtype=float)
    return np.exp(-((t - mu) ** 2) / (2.0 * var)) / (_SQRT_TWO_PI * np.sqrt(var))


@dataclass(frozen=True)
class KdeModel:
    """Gaussian mixture with one component per histogram bin.

    Attributes
    ----------
    centers : ndarray, shape (N,)
        Component centers (the histogram's bin centers).
    weights : ndarray, shape (N,)
        Non-negative weights with ``bin_width * weights.sum() == 1``.
    variance : float
        Shared variance (bandwidth) of all components.
    bin_width : float
        Grid step of the centers.
    """

    centers: np.ndarray
    weights: np.ndarray
    variance: float
    bin_width: float

    def __post_init__(self):
        t = np.asarray(self.centers, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        var = float(self.variance)
        dt = float(self.bin_width)
        if t.ndim != 1 or w.ndim != 1 or t.shape != w.shape:
            raise InvalidArgumentError("centers and weights must be equal-length 1-D arrays")
        if t.size < 2:
            raise InvalidArgumentError("a model needs at least 2 components")
        if not var > 0:
            raise InvalidArgumentError(f"variance must be positive, got {var}")
        if not dt > 0:
            raise InvalidArgumentError(f"bin width must be positive, got {dt}")
        if not (np.isfinite(t).all() and np.isfinite(w).all()):
            raise InvalidArgumentError("model fields must be finite")
        if np.any(np.abs(np.diff(t) - dt) > 1e-9 * dt):
            raise InvalidArgumentError("centers are not uniformly spaced")
        if np.any(w < 0):
            raise InvalidArgumentError("weights must be non-negative")
        mass = dt * w.sum()
        if abs(mass - 1.0) > 1e-8:
            raise InvalidArgumentError(
                f"model does not integrate to 1: bin_width * sum(weights) = {mass!r}"
            )
        t.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "centers", t)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "variance", var)
        object.__setattr__(self, "bin_width", dt)

    def __len__(self):
        return self.centers.size


def _mixture_sum(model, t, order):
    """Weighted component sums of the density (order 0) or its first/second
    derivative (order 1/2), chunked to bound memory."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t_arr.shape)
    var = model.variance
    norm = 1.0 / (_SQRT_TWO_PI * np.sqrt(var))
    centers = model.centers
    scaled = model.weights * model.bin_width
    for start in range(0, t_arr.size, _EVAL_CHUNK):
        sl = slice(start, min(start + _EVAL_CHUNK, t_arr.size))
        diff = t_arr[sl, None] - centers[None, :]
        g = np.exp(diff * diff / (-2.0 * var)) * norm
        if order == 1:
            g *= -diff / var
        elif order == 2:
            g *= (diff * diff - var) / (var * var)
        out[sl] = g @ scaled
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out[0])
    return out


def evaluate(model, t):
    """Model density at ``t`` (scalar or array)."""
    return _mixture_sum(model, t, 0)


def derivative1(model, t):
    """Analytic first derivative of the model density at ``t``."""
    return _mixture_sum(model, t, 1)


def derivative2(model, t):
    """Analytic second derivative of the model density at ``t``."""
    return _mixture_sum(model, t, 2)


def at_scale(model, dsigma2):
    """Shift the model through scale-space by ``dsigma2``.

    Adding ``dsigma2 > 0`` to the variance smooths the model exactly as a
    Gaussian convolution would (semi-group property); ``dsigma2 < 0``
    sharpens it, as long as the shifted variance stays positive.
    """
    new_var = model.variance + dsigma2
    if not new_var > 0:
        raise ScaleUnderflowError(
            f"variance {model.variance} + offset {dsigma2} is not positive"
        )
    return replace(model, variance=new_var)


@dataclass(frozen=True)
class EmConfig:
    """Settings for the EM deconvolution loop.

    ``variance_rule`` selects the shared-variance update: "corrected" is the
    moment-matched rule whose fixed point reproduces the current variance on
    already-converged data; "printed" multiplies the current variance by the
    same moment and is kept only for auditing (it has no consistent fixed
    point and blows up or collapses on most inputs).
    """

    delta: float = 1e-6
    max_iterations: int = 10000
    division_floor: float = 1e-12
    update_variance: bool = True
    variance_rule: str = "corrected"

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidArgumentError(f"delta must be positive, got {self.delta}")
        if int(self.max_iterations) < 1:
            raise InvalidArgumentError("max_iterations must be at least 1")
        if not self.division_floor > 0:
            raise InvalidArgumentError("division_floor must be positive")
        if self.variance_rule not in ("corrected", "printed"):
            raise InvalidArgumentError(
                f"variance_rule must be 'corrected' or 'printed', got {self.variance_rule!r}"
            )


@dataclass(frozen=True)
class EmFitResult:
    model: "KdeModel"
    iterations: int
    final_residual: float
    converged: bool


def _window_sums(values, center, n):
    """``out[j] = sum_i values[center + i - j]`` over valid indices, for
    ``i, j`` in ``[0, n)``: the response of the kernel to a flat unit signal
    (detector sensitivity of the finite window)."""
    csum = np.concatenate(([0.0], np.cumsum(values)))
    j = np.arange(n)
    lo = np.clip(center - j, 0, n)
    hi = np.clip(center + n - j, 0, n)
    return csum[hi] - csum[lo]


def em_iterations(hist, config=None):
    """Generator over EM deconvolution iterations for ``hist``.

    Yields ``(weights, sigma2, residual)`` after each iteration, where
    ``weights`` is renormalized so the model integrates to 1 and
    ``residual`` is the convergence statistic
    ``sum(|w_new - w_old| / w_old)`` over entries with ``w_old`` at or above
    the division floor.  The caller decides when to stop; ``em_fit`` wraps
    this with the configured stopping rule.

    Each iteration evaluates the Gaussian kernel on the centered bin-offset
    grid, forms the data/model ratio with the floored model, and applies the
    multiplicative update.  The update factor is divided by the kernel's
    response to a flat signal on the finite window, which removes the
    attenuation a zero-padded convolution imposes near the domain edges;
    without it, edge weights decay every iteration and stationary inputs
    would not be fixed points.
    """
    if config is None:
        config = EmConfig()
    h = np.asarray(hist.densities, dtype=float)
    dt = float(hist.bin_width)
    n = h.size
    if h.sum() <= 0:
        raise InvalidArgumentError("histogram has zero total mass")
    center = n // 2
    offsets = (np.arange(n) - center) * dt
    offsets_sq = offsets * offsets
    size = next_pow2(2 * n - 1)
    window = slice(center, center + n)
    floor = config.division_floor

    weights = np.full(n, 1.0 / (n * dt))
    sigma2 = dt
    f_h_ratio = None  # placeholder to keep locals obvious

    while True:
        kernel = gaussian(offsets, 0.0, sigma2)
        f_kernel = np.fft.rfft(kernel, size)
        f_weights = np.fft.rfft(weights, size)
        model_on_grid = np.fft.irfft(f_weights * f_kernel, size)[window]
        ratio = h / np.maximum(model_on_grid, floor)
        f_ratio = np.fft.rfft(ratio, size)
        update = np.fft.irfft(f_ratio * f_kernel, size)[window]
        sensitivity = _window_sums(kernel, center, n)
        new_weights = weights * update / sensitivity

        if config.update_variance:
            second_moment_kernel = offsets_sq * kernel
            f_moment = np.fft.rfft(second_moment_kernel, size)
            moment = np.fft.irfft(f_ratio * f_moment, size)[window]
            estimate = dt * float(np.dot(weights, moment))
            if config.variance_rule == "printed":
                estimate *= sigma2
            # Degeneracy guard: a single-bin histogram drives the bandwidth
            # to zero, which the Gaussian kernel cannot represent.
            sigma2 = max(estimate, floor)

        mass = dt * new_weights.sum()
        if not mass > 0:
            raise InvalidArgumentError("EM update lost all mass")
        new_weights /= mass

        significant = weights >= floor
        if significant.any():
            residual = float(
                np.sum(
                    np.abs(new_weights[significant] - weights[significant])
                    / weights[significant]
                )
            )
        else:
            residual = 0.0
        weights = new_weights
        yield weights.copy(), sigma2, residual


def em_fit(hist, config=None, trace_path=None):
    """Fit a KdeModel to a histogram by EM deconvolution.

    Starts from flat weights ``1/(N*bin_width)`` and variance equal to the
    bin width, iterates until the relative-change statistic drops below
    ``config.delta`` or ``config.max_iterations`` is reached, and returns an
    :class:`EmFitResult`.  Non-convergence is reported through the
    ``converged`` flag, not an error, so batch runs never abort.

    When ``trace_path`` is given, a per-iteration CSV
    ``iteration,residual,sigma2`` is written.
    """
    if config is None:
        config = EmConfig()
    trace_rows = [] if trace_path is not None else None
    iterations = 0
    residual = np.inf
    weights = None
    sigma2 = None
    for weights, sigma2, residual in em_iterations(hist, config):
        iterations += 1
        if trace_rows is not None:
            trace_rows.append((iterations, residual, sigma2))
        if residual < config.delta or iterations >= config.max_iterations:
            break
    if trace_rows is not None:
        with open(trace_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["iteration", "residual", "sigma2"])
            for row in trace_rows:
                writer.writerow([row[0], repr(row[1]), repr(row[2])])
    model = KdeModel(hist.centers, weights, sigma2, hist.bin_width)
    return EmFitResult(model, iterations, residual, residual < config.delta)


def fit_divergence(hist, model):
    """Kullback-Leibler divergence from the histogram to the model on the
    bin grid, with both sides normalized to probability vectors.

    Normalizing makes the statistic invariant to the overall scale of
    either argument, so the per-iteration weight renormalization inside the
    EM loop cannot disturb it; with the variance held fixed, this is the
    objective the multiplicative update never increases.  ``0*log(0)`` is
    taken as 0.
    """
    h = np.asarray(hist.densities, dtype=float)
    m = evaluate(model, hist.centers)
    p = h / h.sum()
    q = m / m.sum()
    positive = p > 0
    if np.any(q[positive] <= 0):
        return np.inf
    return float(np.sum(p[positive] * np.log(p[positive] / q[positive])))
