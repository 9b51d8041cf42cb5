"""Porosity estimation for grayscale image stacks.

Pipeline: decode a stack of binary PGM slices, pool every pixel into one
intensity histogram, split it into three classes (void, unresolved porous,
solid, in order of increasing intensity), anchor the affine intensity-to-
porosity map at the mean intensities of the outer classes, and integrate
the mapped histogram to get the mean porosity.

A synthetic three-phase phantom generator with known ground-truth porosity
stands in for proprietary tomography data in tests and demos.
"""

import json
import re
from dataclasses import dataclass

import numpy as np

from . import baseline, histogram, kde, scalespace
from .errors import (
    DegenerateReferencesError,
    EmptyClusterError,
    FormatError,
    InvalidArgumentError,
)

#: Spatial granularity of phantom phase regions, in pixels.
PHANTOM_BLOCK = 16


@dataclass(frozen=True)
class ImageStack:
    """Stack of equally sized grayscale slices.

    ``slices`` is a list of 2-D integer arrays; ``max_value`` is the
    brightest representable intensity (255 or 65535 for PGM data).
    """

    slices: tuple
    width: int
    height: int
    max_value: int

    def __post_init__(self):
        slices = tuple(self.slices)
        if not slices:
            raise InvalidArgumentError("a stack needs at least one slice")
        for array in slices:
            if array.shape != (self.height, self.width):
                raise InvalidArgumentError("all slices must share dimensions")
        object.__setattr__(self, "slices", slices)

    def __len__(self):
        return len(self.slices)


@dataclass(frozen=True)
class PorosityReport:
    """Thresholds, reference intensities, and the mean porosity estimate."""

    tau1: float
    tau2: float
    reference_void: float
    reference_solid: float
    mean_porosity: float
    method: str

    def __post_init__(self):
        if not self.tau1 < self.tau2:
            raise InvalidArgumentError("tau1 must be below tau2")
        if not 0.0 <= self.mean_porosity <= 1.0:
            raise InvalidArgumentError("mean porosity must lie in [0, 1]")


def _read_pgm(path):
    """Decode one binary (P5) PGM file into a 2-D array plus its maxval."""
    with open(path, "rb") as handle:
        data = handle.read()

    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments running to end of line, then exactly one whitespace
    # byte before the payload.
    pos = 0
    tokens = []
    while len(tokens) < 4:
        if pos >= len(data):
            raise FormatError(f"{path}: truncated header")
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
            continue
        if ch == b"#":
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise FormatError(f"{path}: comment runs past end of file")
            pos = eol + 1
            continue
        match = re.match(rb"[^\s#]+", data[pos:])
        tokens.append(match.group(0))
        pos += match.end()
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: expected binary PGM magic 'P5', got {tokens[0]!r}")
    try:
        width, height, max_value = (int(tok) for tok in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: non-numeric header fields {tokens[1:]!r}") from None
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < max_value < 65536:
        raise FormatError(f"{path}: maxval {max_value} outside (0, 65536)")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace before pixel data")
    pos += 1

    bytes_per_sample = 1 if max_value < 256 else 2
    expected = width * height * bytes_per_sample
    payload = data[pos : pos + expected]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: truncated payload, expected {expected} bytes, got {len(payload)}"
        )
    dtype = np.uint8 if bytes_per_sample == 1 else np.dtype(">u2")
    pixels = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    if bytes_per_sample == 2:
        pixels = pixels.astype(np.uint16)
    return pixels, max_value


def write_pgm(path, pixels, max_value):
    """Write one 2-D integer array as a binary (P5) PGM file."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise InvalidArgumentError("pixels must be a 2-D array")
    if not 0 < int(max_value) < 65536:
        raise InvalidArgumentError(f"maxval {max_value} outside (0, 65536)")
    if pixels.min() < 0 or pixels.max() > int(max_value):
        raise InvalidArgumentError("pixel values outside [0, maxval]")
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n{int(max_value)}\n".encode("ascii")
    if int(max_value) < 256:
        payload = pixels.astype(np.uint8).tobytes()
    else:
        payload = pixels.astype(">u2").tobytes()
    with open(path, "wb") as handle:
        handle.write(header + payload)


def load_stack(paths):
    """Load binary PGM files into an ImageStack, enforcing consistent
    dimensions and bit depth across slices."""
    paths = list(paths)
    if not paths:
        raise InvalidArgumentError("no slice files given")
    slices = []
    width = height = max_value = None
    for path in paths:
        pixels, maxval = _read_pgm(path)
        if width is None:
            height, width = pixels.shape
            max_value = maxval
        else:
            if pixels.shape != (height, width):
                raise FormatError(
                    f"{path}: slice is {pixels.shape[1]}x{pixels.shape[0]}, "
                    f"stack is {width}x{height}"
                )
            if maxval != max_value:
                raise FormatError(
                    f"{path}: maxval {maxval} differs from stack maxval {max_value}"
                )
        slices.append(pixels)
    return ImageStack(tuple(slices), width, height, max_value)


def save_stack(stack, paths):
    """Write every slice of a stack as a binary PGM file."""
    paths = list(paths)
    if len(paths) != len(stack):
        raise InvalidArgumentError(
            f"{len(paths)} paths for {len(stack)} slices"
        )
    for path, pixels in zip(paths, stack.slices):
        write_pgm(path, pixels, stack.max_value)


def combined_histogram(stack, n_bins):
    """Pool every pixel of every slice into one normalized histogram on
    ``[0, max_value + 1)``.

    Counts accumulate per slice as integers before normalization, so slice
    order and any parallel merge cannot perturb the result.
    """
    n_bins = int(n_bins)
    if n_bins < 2:
        raise InvalidArgumentError(f"need n_bins >= 2, got {n_bins}")
    lo, hi = 0.0, float(stack.max_value) + 1.0
    dt = (hi - lo) / n_bins
    counts = np.zeros(n_bins, dtype=np.int64)
    for pixels in stack.slices:
        idx = np.floor(pixels.ravel() / dt).astype(np.intp)
        np.clip(idx, 0, n_bins - 1, out=idx)
        counts += np.bincount(idx, minlength=n_bins)
    return histogram.normalize(counts, lo, hi)


def reference_points(hist, tau1, tau2):
    """Mean intensities of the two outer clusters.

    The void reference is the density-weighted mean of bins strictly below
    ``tau1``; the solid reference is the weighted mean of bins strictly
    above ``tau2``.
    """
    if not tau1 < tau2:
        raise InvalidArgumentError(f"need tau1 < tau2, got {tau1}, {tau2}")
    t = hist.centers
    h = hist.densities
    below = t < tau1
    above = t > tau2
    mass_below = h[below].sum()
    mass_above = h[above].sum()
    if mass_below <= 0:
        raise EmptyClusterError(f"no histogram mass below tau1 = {tau1}")
    if mass_above <= 0:
        raise EmptyClusterError(f"no histogram mass above tau2 = {tau2}")
    reference_void = float(np.dot(t[below], h[below]) / mass_below)
    reference_solid = float(np.dot(t[above], h[above]) / mass_above)
    return reference_void, reference_solid


def porosity_of_intensity(t, reference_void, reference_solid):
    """Affine intensity-to-porosity map, clamped to [0, 1].

    The solid reference maps to porosity 0 and the void reference to 1;
    intensities beyond either anchor (noise tails) are clamped so the
    result stays physical.
    """
    if reference_void == reference_solid:
        raise DegenerateReferencesError(
            f"void and solid references coincide at {reference_void}"
        )
    phi = (np.asarray(t, dtype=float) - reference_solid) / (
        reference_void - reference_solid
    )
    clipped = np.clip(phi, 0.0, 1.0)
    if np.ndim(t) == 0:
        return float(clipped)
    return clipped


def mean_porosity(hist, reference_void, reference_solid):
    """First moment of the porosity histogram: the average porosity."""
    phi = porosity_of_intensity(hist.centers, reference_void, reference_solid)
    return float(hist.bin_width * np.dot(hist.densities, phi))


def generate_phantom(
    width,
    height,
    n_slices,
    phase_fractions,
    phase_means,
    phase_noise_sigma,
    seed,
    max_value=65535,
):
    """Synthetic three-phase stack with known porosity.

    Slices are tiled into square blocks (``PHANTOM_BLOCK`` pixels) and whole
    blocks are assigned to the void / porous / solid phases in the requested
    proportions, giving the blotchy spatial structure of real tomography
    rather than per-pixel noise.  Pixel intensities are the phase mean plus
    Gaussian noise, clipped to the bit depth.

    Returns ``(stack, ground_truth_porosity)`` where the ground truth is the
    porosity map applied to the noiseless phase means, weighted by the
    realized per-pixel phase fractions: void pixels count as porosity 1,
    solid as 0, and porous pixels as the map value of their mean intensity.
    """
    fractions = np.asarray(phase_fractions, dtype=float)
    means = np.asarray(phase_means, dtype=float)
    if fractions.shape != (3,) or means.shape != (3,):
        raise InvalidArgumentError("need exactly 3 phase fractions and means")
    if np.any(fractions < 0) or abs(fractions.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError("phase fractions must be non-negative and sum to 1")
    if np.any(np.diff(means) <= 0):
        raise InvalidArgumentError("phase means must be strictly increasing")
    if not phase_noise_sigma > 0:
        raise InvalidArgumentError("phase noise sigma must be positive")
    if np.any(means < 0) or np.any(means > max_value):
        raise InvalidArgumentError("phase means outside the intensity range")

    rng = np.random.default_rng(seed)
    blocks_x = -(-width // PHANTOM_BLOCK)
    blocks_y = -(-height // PHANTOM_BLOCK)
    n_blocks = blocks_x * blocks_y * n_slices

    # Largest-remainder apportionment of blocks to phases.
    ideal = fractions * n_blocks
    counts = np.floor(ideal).astype(int)
    remainder = n_blocks - counts.sum()
    order = np.argsort(-(ideal - counts))
    counts[order[:remainder]] += 1
    labels = np.repeat(np.arange(3), counts)
    labels = rng.permutation(labels)

    slices = []
    pixel_counts = np.zeros(3, dtype=np.int64)
    block_index = 0
    for _ in range(n_slices):
        label_grid = labels[block_index : block_index + blocks_x * blocks_y].reshape(
            blocks_y, blocks_x
        )
        block_index += blocks_x * blocks_y
        phase_map = np.repeat(
            np.repeat(label_grid, PHANTOM_BLOCK, axis=0), PHANTOM_BLOCK, axis=1
        )[:height, :width]
        pixel_counts += np.bincount(phase_map.ravel(), minlength=3)
        noisy = means[phase_map] + rng.normal(0.0, phase_noise_sigma, phase_map.shape)
        clipped = np.clip(np.rint(noisy), 0, max_value)
        dtype = np.uint8 if max_value < 256 else np.uint16
        slices.append(clipped.astype(dtype))

    stack = ImageStack(tuple(slices), width, height, int(max_value))
    porous_phi = porosity_of_intensity(means[1], means[0], means[2])
    realized = pixel_counts / pixel_counts.sum()
    ground_truth = float(realized[0] * 1.0 + realized[1] * porous_phi)
    return stack, ground_truth


def estimate_porosity(
    hist,
    method="kde",
    dsigma2=None,
    em_config=None,
    max_steps=10000,
):
    """Threshold a pooled intensity histogram into three classes with the
    chosen method and derive the mean porosity.

    ``method`` is "kde" (EM fit plus scale walk) or "kmeans" (the weighted
    Lloyd baseline); everything downstream of the two thresholds is
    identical, so reports differ only through the thresholds.  When
    ``dsigma2`` is omitted the walk step defaults to half the bin width,
    keeping it below the bin width whatever the intensity range.
    """
    if method == "kde":
        if dsigma2 is None:
            dsigma2 = 0.5 * hist.bin_width
        fit = kde.em_fit(hist, em_config)
        detection = scalespace.detect_thresholds(fit.model, 3, dsigma2, max_steps)
        tau1, tau2 = (float(v) for v in detection.thresholds)
    elif method == "kmeans":
        result = baseline.kmeans_1d(hist, 3)
        tau1, tau2 = (float(v) for v in result.thresholds)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    reference_void, reference_solid = reference_points(hist, tau1, tau2)
    porosity = mean_porosity(hist, reference_void, reference_solid)
    return PorosityReport(tau1, tau2, reference_void, reference_solid, porosity, method)


def report_to_dict(report):
    return {
        "tau1": report.tau1,
        "tau2": report.tau2,
        "reference_void": report.reference_void,
        "reference_solid": report.reference_solid,
        "mean_porosity": report.mean_porosity,
        "method": report.method,
    }


def write_report_json(report, path):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report_to_dict(report), handle, indent=2, sort_keys=True)
        handle.write("\n")
