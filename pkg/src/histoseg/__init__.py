"""histoseg: multiclass histogram thresholding by kernel-density
deconvolution and scale-space minima counting.

A histogram is modeled as a Gaussian mixture with one component per bin and
a shared bandwidth, fitted by multiplicative EM deconvolution.  Sliding the
fitted bandwidth up or down (in closed form) until the model has exactly
``C - 1`` local minima yields the ``C``-class thresholds, including for
overlapped modes that merge into a unimodal histogram.  A synthetic
Cauchy-mixture validation harness, a weighted 1-D k-means baseline, and a
porosity pipeline for grayscale image stacks round out the package.
"""

from .baseline import KMeansResult, kmeans_1d
from .errors import (
    BracketError,
    CountUnreachableError,
    DegenerateMixtureError,
    DegenerateReferencesError,
    EmptyClusterError,
    EmptyHistogramError,
    FormatError,
    HistosegError,
    InvalidArgumentError,
    ScaleUnderflowError,
    SearchLimitError,
    UnresolvableClustersError,
)
from .histogram import Histogram, from_density, from_samples, normalize, read_csv, write_csv
from .kde import EmConfig, EmFitResult, KdeModel, at_scale, derivative1, derivative2, em_fit, evaluate, gaussian
from .numerics import linear_convolve, refine_root
from .porosity import (
    ImageStack,
    PorosityReport,
    combined_histogram,
    estimate_porosity,
    generate_phantom,
    load_stack,
    mean_porosity,
    porosity_of_intensity,
    reference_points,
)
from .scalespace import MinimaSet, ThresholdResult, detect_thresholds, local_minima
from .synthetic import (
    CauchyMixture,
    GaussianMixtureTruth,
    ValidationReport,
    component_pdf,
    draw_samples,
    gaussian_truth_thresholds,
    mixture_pdf,
    reference_thresholds,
    run_validation,
    sample_mixture,
)

__version__ = "0.1.0"
