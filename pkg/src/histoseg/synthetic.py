"""Synthetic validation harness: Cauchy-mixture ground truth with analytic
reference thresholds, seeded sampling, and batch evaluation of the full
fit-then-walk pipeline against those references.

Also provides the ground-truth Gaussian mixture type whose pairwise
weighted crossings serve as the oracle for threshold-accuracy tests.
"""

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import histogram, kde, scalespace
from .errors import (
    CountUnreachableError,
    DegenerateMixtureError,
    EmptyHistogramError,
    HistosegError,
    InvalidArgumentError,
    SearchLimitError,
    UnresolvableClustersError,
)
from .numerics import refine_root

#: Parameter ranges for mixture sampling: locations, scales, raw weights.
LOCATION_RANGE = (-4.0, 4.0)
SCALE_RANGE = (0.5, 2.0)
WEIGHT_RANGE = (0.2, 0.5)

#: Histogram support used throughout the validation protocol.
VALIDATION_RANGE = (-15.0, 15.0)

#: Grid density for the sign scan that brackets component crossings.
_CROSSING_SCAN_POINTS = 4096
_CROSSING_TOL = 1e-12


@dataclass(frozen=True)
class CauchyMixture:
    """Three-component Cauchy mixture with sorted locations and weights
    normalized to sum to one."""

    locations: np.ndarray
    scales: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.locations, dtype=float)
        b = np.asarray(self.scales, dtype=float)
        c = np.asarray(self.weights, dtype=float)
        if not (a.shape == b.shape == c.shape == (3,)):
            raise InvalidArgumentError("mixture needs exactly 3 components")
        if np.any(np.diff(a) < 0):
            raise InvalidArgumentError("locations must be sorted ascending")
        if np.any(b <= 0):
            raise InvalidArgumentError("scales must be positive")
        if np.any(c <= 0) or abs(c.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("weights must be positive and sum to 1")
        for arr in (a, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "locations", a)
        object.__setattr__(self, "scales", b)
        object.__setattr__(self, "weights", c)


@dataclass(frozen=True)
class GaussianMixtureTruth:
    """Ground-truth Gaussian mixture with strictly increasing means."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        var = np.asarray(self.variances, dtype=float)
        if not (w.shape == mu.shape == var.shape) or w.ndim != 1 or w.size < 2:
            raise InvalidArgumentError("need equal-length parameter arrays, K >= 2")
        if abs(w.sum() - 1.0) > 1e-12 or np.any(w <= 0):
            raise InvalidArgumentError("weights must be positive and sum to 1")
        if np.any(var <= 0):
            raise InvalidArgumentError("variances must be positive")
        if np.any(np.diff(mu) <= 0):
            raise InvalidArgumentError("means must be strictly increasing")
        for arr in (w, mu, var):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        total = np.zeros(t.shape)
        for w, mu, var in zip(self.weights, self.means, self.variances):
            total += w * kde.gaussian(t, mu, var)
        return total


def sample_mixture(rng_seed):
    """Draw a random CauchyMixture: locations uniform on (-4, 4) then
    sorted, scales uniform on (0.5, 2), weights uniform on (0.2, 0.5) then
    normalized by their sum.  The draw order (locations, scales, weights,
    three values each) is part of the reproducibility contract."""
    rng = np.random.default_rng(rng_seed)
    locations = np.sort(rng.uniform(*LOCATION_RANGE, size=3))
    scales = rng.uniform(*SCALE_RANGE, size=3)
    raw = rng.uniform(*WEIGHT_RANGE, size=3)
    return CauchyMixture(locations, scales, raw / raw.sum())


def component_pdf(mixture, j, t):
    """The ``j``-th weighted component density ``c_j * Cauchy(t; a_j, b_j)``."""
    a = mixture.locations[j]
    b = mixture.scales[j]
    c = mixture.weights[j]
    t = np.asarray(t, dtype=float)
    return c / (np.pi * b * (1.0 + ((t - a) / b) ** 2))


def mixture_pdf(mixture, t):
    """Full mixture density at ``t``."""
    t = np.asarray(t, dtype=float)
    total = np.zeros(t.shape)
    for j in range(3):
        total += component_pdf(mixture, j, t)
    return total


def mixture_cdf(mixture, t):
    """Analytic mixture distribution function (for sampling checks)."""
    t = np.asarray(t, dtype=float)
    total = np.zeros(t.shape)
    for a, b, c in zip(mixture.locations, mixture.scales, mixture.weights):
        total += c * (np.arctan((t - a) / b) / np.pi + 0.5)
    return total


def _pairwise_crossing(left, right, lo, hi):
    """Root of ``left(t) - right(t)`` inside the open interval ``(lo, hi)``.

    A sign scan locates candidate crossings; the one where the left
    component hands over to the right (positive difference turning
    negative) is preferred, matching the classifier-boundary convention.
    """
    if not hi > lo:
        raise DegenerateMixtureError(
            f"empty interval ({lo}, {hi}) between component locations"
        )
    grid = np.linspace(lo, hi, _CROSSING_SCAN_POINTS)[1:-1]
    diff = left(grid) - right(grid)
    signs = diff > 0
    flips = np.flatnonzero(signs[:-1] != signs[1:])
    if flips.size == 0:
        raise DegenerateMixtureError(
            f"components do not cross in ({lo}, {hi}): one dominates throughout"
        )
    preferred = [k for k in flips if signs[k] and not signs[k + 1]]
    k = preferred[0] if preferred else flips[0]
    f = lambda t: float(left(t) - right(t))
    return refine_root(f, float(grid[k]), float(grid[k + 1]), _CROSSING_TOL)


def reference_thresholds(mixture):
    """The two crossing points of consecutive weighted Cauchy components,
    each located inside the open interval between their locations."""
    taus = []
    for k in range(2):
        taus.append(
            _pairwise_crossing(
                lambda t, k=k: component_pdf(mixture, k, t),
                lambda t, k=k: component_pdf(mixture, k + 1, t),
                mixture.locations[k],
                mixture.locations[k + 1],
            )
        )
    return np.array(taus)


def gaussian_truth_thresholds(truth):
    """Pairwise weighted-Gaussian crossing points between consecutive
    components of a ground-truth mixture, one per adjacent pair."""
    taus = []
    for k in range(len(truth.means) - 1):
        w1, mu1, v1 = truth.weights[k], truth.means[k], truth.variances[k]
        w2, mu2, v2 = truth.weights[k + 1], truth.means[k + 1], truth.variances[k + 1]
        taus.append(
            _pairwise_crossing(
                lambda t, w=w1, mu=mu1, v=v1: w * kde.gaussian(t, mu, v),
                lambda t, w=w2, mu=mu2, v=v2: w * kde.gaussian(t, mu, v),
                mu1,
                mu2,
            )
        )
    return np.array(taus)


def draw_samples(mixture, n, rng_seed):
    """Draw ``n`` mixture samples: component indices first (one uniform
    array), then inverse-CDF Cauchy values (a second uniform array)."""
    n = int(n)
    if n <= 0:
        raise InvalidArgumentError(f"need n > 0, got {n}")
    rng = np.random.default_rng(rng_seed)
    boundaries = np.cumsum(mixture.weights)
    picks = np.searchsorted(boundaries, rng.random(n), side="right")
    np.clip(picks, 0, 2, out=picks)
    u = rng.random(n)
    a = mixture.locations[picks]
    b = mixture.scales[picks]
    return a + b * np.tan(np.pi * (u - 0.5))


@dataclass
class CaseResult:
    """Outcome of one validation case."""

    index: int
    mixture_seed: int
    samples_seed: int
    locations: np.ndarray
    scales: np.ndarray
    weights: np.ndarray
    status: str  # "ok", "degenerate", or "failed:<reason>"
    reference: np.ndarray | None = None
    predicted: np.ndarray | None = None
    deviations: np.ndarray | None = None
    base_minima: int | None = None
    minima_class: str | None = None  # "over", "under", "exact"
    em_iterations: int | None = None
    em_converged: bool | None = None
    direction: str | None = None
    steps: int | None = None
    scale_offset: float | None = None


@dataclass
class ValidationSummary:
    n_cases: int
    n_evaluated: int
    n_degenerate: int
    n_failed: int
    n_thresholds: int
    n_deviating: int
    deviation_fraction: float
    n_over_resolved: int
    n_under_resolved: int
    n_exact: int
    n_bins: int
    samples_per_case: int
    dsigma2: float
    seed: int


@dataclass
class ValidationReport:
    summary: ValidationSummary
    cases: list = field(default_factory=list)


def _case_seeds(seed, index):
    """Two independent sub-seeds for case ``index``, derived so results do
    not depend on evaluation order."""
    state = np.random.SeedSequence(entropy=(int(seed), int(index))).generate_state(
        2, dtype=np.uint64
    )
    return int(state[0]), int(state[1])


def _run_case(index, seed, n_bins, samples_per_case, dsigma2, em_config):
    mixture_seed, samples_seed = _case_seeds(seed, index)
    mixture = sample_mixture(mixture_seed)
    result = CaseResult(
        index=index,
        mixture_seed=mixture_seed,
        samples_seed=samples_seed,
        locations=mixture.locations,
        scales=mixture.scales,
        weights=mixture.weights,
        status="ok",
    )
    try:
        result.reference = reference_thresholds(mixture)
    except DegenerateMixtureError:
        result.status = "degenerate"
        return result
    samples = draw_samples(mixture, samples_per_case, samples_seed)
    try:
        hist = histogram.from_samples(samples, *VALIDATION_RANGE, n_bins)
    except EmptyHistogramError:
        result.status = "failed:empty-histogram"
        return result
    fit = kde.em_fit(hist, em_config)
    result.em_iterations = fit.iterations
    result.em_converged = fit.converged
    base = scalespace.local_minima(fit.model)
    result.base_minima = len(base)
    if result.base_minima > 2:
        result.minima_class = "over"
    elif result.base_minima < 2:
        result.minima_class = "under"
    else:
        result.minima_class = "exact"
    try:
        detection = scalespace.detect_thresholds(fit.model, 3, dsigma2)
    except UnresolvableClustersError:
        result.status = "failed:unresolvable-clusters"
        return result
    except SearchLimitError:
        result.status = "failed:search-limit"
        return result
    except CountUnreachableError:
        result.status = "failed:count-unreachable"
        return result
    result.predicted = detection.thresholds
    result.deviations = np.abs(result.predicted - result.reference)
    result.direction = detection.direction
    result.steps = detection.steps
    result.scale_offset = detection.scale_offset
    return result


def run_validation(
    n_cases,
    n_bins,
    samples_per_case=10000,
    dsigma2=0.01,
    seed=0,
    em_config=None,
    threads=1,
    deviation_bound=1.0,
):
    """Evaluate the pipeline on seeded random Cauchy mixtures.

    Per case: sample a mixture, compute its two reference crossings (cases
    without a crossing are skipped and counted), draw samples, histogram
    them on [-15, 15], fit the KDE by EM, record the base-scale minima
    count, run the three-class threshold walk, and record the absolute
    deviation of each predicted threshold from its reference.  Per-case
    pipeline failures are recorded in the case status, never raised.

    The summary's ``deviation_fraction`` is the fraction of compared
    thresholds whose deviation exceeds ``deviation_bound``.
    """
    n_cases = int(n_cases)
    if n_cases < 1:
        raise InvalidArgumentError("need at least one case")
    worker = lambda index: _run_case(
        index, seed, n_bins, samples_per_case, dsigma2, em_config
    )
    if threads and int(threads) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            cases = list(pool.map(worker, range(n_cases)))
    else:
        cases = [worker(index) for index in range(n_cases)]

    deviations = np.concatenate(
        [case.deviations for case in cases if case.deviations is not None]
    ) if any(case.deviations is not None for case in cases) else np.empty(0)
    n_deviating = int((deviations > deviation_bound).sum())
    classes = [case.minima_class for case in cases if case.minima_class]
    summary = ValidationSummary(
        n_cases=n_cases,
        n_evaluated=sum(case.status == "ok" for case in cases),
        n_degenerate=sum(case.status == "degenerate" for case in cases),
        n_failed=sum(case.status.startswith("failed") for case in cases),
        n_thresholds=int(deviations.size),
        n_deviating=n_deviating,
        deviation_fraction=n_deviating / deviations.size if deviations.size else 0.0,
        n_over_resolved=classes.count("over"),
        n_under_resolved=classes.count("under"),
        n_exact=classes.count("exact"),
        n_bins=int(n_bins),
        samples_per_case=int(samples_per_case),
        dsigma2=float(dsigma2),
        seed=int(seed),
    )
    return ValidationReport(summary, cases)


def summary_to_dict(summary):
    return {
        "n_cases": summary.n_cases,
        "n_evaluated": summary.n_evaluated,
        "n_degenerate": summary.n_degenerate,
        "n_failed": summary.n_failed,
        "n_thresholds": summary.n_thresholds,
        "n_deviating": summary.n_deviating,
        "deviation_fraction": summary.deviation_fraction,
        "n_over_resolved": summary.n_over_resolved,
        "n_under_resolved": summary.n_under_resolved,
        "n_exact": summary.n_exact,
        "n_bins": summary.n_bins,
        "samples_per_case": summary.samples_per_case,
        "dsigma2": summary.dsigma2,
        "seed": summary.seed,
    }


def write_summary_json(report, path):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(summary_to_dict(report.summary), handle, indent=2, sort_keys=True)
        handle.write("\n")


_CSV_COLUMNS = [
    "case",
    "mixture_seed",
    "samples_seed",
    "a1",
    "a2",
    "a3",
    "b1",
    "b2",
    "b3",
    "c1",
    "c2",
    "c3",
    "status",
    "ref_tau1",
    "ref_tau2",
    "pred_tau1",
    "pred_tau2",
    "dev1",
    "dev2",
    "base_minima",
    "minima_class",
    "em_iterations",
    "em_converged",
    "direction",
    "steps",
    "scale_offset",
]


def write_cases_csv(report, path):
    """One row per case; absent values (skipped/failed cases) left empty."""

    def fmt(value):
        if value is None:
            return ""
        if isinstance(value, float):
            return repr(value)
        return str(value)

    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(_CSV_COLUMNS)
        for case in report.cases:
            ref = case.reference if case.reference is not None else (None, None)
            pred = case.predicted if case.predicted is not None else (None, None)
            dev = case.deviations if case.deviations is not None else (None, None)
            row = [
                case.index,
                case.mixture_seed,
                case.samples_seed,
                *(repr(float(v)) for v in case.locations),
                *(repr(float(v)) for v in case.scales),
                *(repr(float(v)) for v in case.weights),
                case.status,
                fmt(None if ref[0] is None else float(ref[0])),
                fmt(None if ref[1] is None else float(ref[1])),
                fmt(None if pred[0] is None else float(pred[0])),
                fmt(None if pred[1] is None else float(pred[1])),
                fmt(None if dev[0] is None else float(dev[0])),
                fmt(None if dev[1] is None else float(dev[1])),
                fmt(case.base_minima),
                fmt(case.minima_class),
                fmt(case.em_iterations),
                fmt(case.em_converged),
                fmt(case.direction),
                fmt(case.steps),
                fmt(case.scale_offset),
            ]
            writer.writerow(row)
