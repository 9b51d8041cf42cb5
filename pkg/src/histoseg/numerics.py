"""Shared numerical kernels: FFT linear convolution and bisection root refinement."""

import numpy as np

from .errors import BracketError, InvalidArgumentError

#: Hard cap on bisection iterations; 200 halvings shrink any double-precision
#: bracket below any representable positive tolerance.
MAX_BISECTIONS = 200


def next_pow2(n):
    """Smallest power of two greater than or equal to ``n``."""
    if n < 1:
        return 1
    return 1 << int(n - 1).bit_length()


def linear_convolve(signal, kernel, kernel_center):
    """Linear (non-circular) convolution of two equal-length sequences,
    evaluated at the signal's own sample positions.

    Both inputs are zero-padded to the next power of two at or above
    ``2N - 1`` before transforming, so wrap-around from the transform
    product can never reach the returned window.  ``kernel_center`` is the
    index of the kernel's origin sample (for a Gaussian kernel, its peak);
    the output window is aligned so that this sample corresponds to zero
    shift::

        out[i] = sum_j signal[j] * kernel[kernel_center + i - j]

    with out-of-range kernel indices contributing zero.

    Parameters
    ----------
    signal, kernel : array_like, shape (N,)
        Sequences of finite reals, equal length.
    kernel_center : int
        Index of the kernel's origin sample, ``0 <= kernel_center < N``.

    Returns
    -------
    ndarray, shape (N,)
        The linear convolution restricted to the original sample positions.
    """
    s = np.asarray(signal, dtype=float)
    k = np.asarray(kernel, dtype=float)
    if s.ndim != 1 or k.ndim != 1:
        raise InvalidArgumentError("signal and kernel must be one-dimensional")
    if s.shape != k.shape:
        raise InvalidArgumentError(
            f"length mismatch: signal has {s.size} samples, kernel has {k.size}"
        )
    if s.size == 0:
        raise InvalidArgumentError("empty inputs")
    if not (np.isfinite(s).all() and np.isfinite(k).all()):
        raise InvalidArgumentError("inputs must be finite (no NaN/Inf)")
    n = s.size
    center = int(kernel_center)
    if not 0 <= center < n:
        raise InvalidArgumentError(
            f"kernel_center {center} outside [0, {n})"
        )
    size = next_pow2(2 * n - 1)
    full = np.fft.irfft(np.fft.rfft(s, size) * np.fft.rfft(k, size), size)
    return full[center : center + n]


def refine_root(f, lo, hi, tol):
    """Refine a bracketed root of a scalar function by bisection.

    Parameters
    ----------
    f : callable
        Scalar real function; ``f(lo)`` and ``f(hi)`` must have strictly
        opposite signs (an exact zero at an endpoint is returned as-is).
    lo, hi : float
        Bracket endpoints, ``lo < hi``.
    tol : float
        Positive bracket-width tolerance.

    Returns
    -------
    float
        A point ``t*`` in ``[lo, hi]`` such that the final bracket around
        ``t*`` is no wider than ``tol`` (or ``f(t*) == 0`` exactly).
    """
    if not tol > 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol}")
    if not lo < hi:
        raise InvalidArgumentError(f"need lo < hi, got [{lo}, {hi}]")
    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0.0) == (f_hi > 0.0):
        raise BracketError(
            f"no sign change over [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}"
        )
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # Bracket collapsed to adjacent floats.
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_hi > 0.0):
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)
