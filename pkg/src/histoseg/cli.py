"""Command-line front end.

Subcommands
-----------
kde        Fit the kernel-density model to a histogram CSV; write the
           weights as CSV plus a JSON sidecar with the bandwidth and
           convergence metadata.
threshold  Fit, then walk scale-space for C-class thresholds; write JSON
           (optionally an SVG overlay plot).
validate   Run the seeded synthetic-mixture validation batch; write a JSON
           summary and a per-case CSV.
porosity   Pool a PGM stack into one histogram, threshold it with the
           chosen method, and write the porosity report JSON plus the
           porosity histogram CSV.

Every subcommand is deterministic given its flags and seeds.  Errors exit
with a distinct code per class so batch drivers can triage without parsing
messages:

====  =======================================================
code  meaning
====  =======================================================
 0    success
 2    command-line usage error
 3    input format error (malformed CSV/PGM, empty histogram)
 4    I/O error (missing or unreadable/unwritable files)
 5    invalid argument or numerical precondition violation
 6    unresolvable clusters (variance underflow during walk)
 7    scale-walk step budget exhausted
 8    no scale with the requested minima count (bisection failed)
 9    degenerate data (no crossing, empty cluster, equal references)
====  =======================================================

The environment variable ``HISTOSEG_THREADS`` caps the number of worker
threads the ``validate`` subcommand may use (default 1).
"""

import argparse
import csv
import glob
import json
import os
import sys

import numpy as np

from . import baseline, histogram, kde, plotting, porosity, scalespace, synthetic
from .errors import (
    BracketError,
    CountUnreachableError,
    DegenerateMixtureError,
    DegenerateReferencesError,
    EmptyClusterError,
    EmptyHistogramError,
    FormatError,
    InvalidArgumentError,
    ScaleUnderflowError,
    SearchLimitError,
    UnresolvableClustersError,
)

EXIT_OK = 0
EXIT_FORMAT = 3
EXIT_IO = 4
EXIT_INVALID = 5
EXIT_UNRESOLVABLE = 6
EXIT_SEARCH_LIMIT = 7
EXIT_COUNT_UNREACHABLE = 8
EXIT_DEGENERATE = 9

_ERROR_CODES = (
    (FormatError, EXIT_FORMAT),
    (EmptyHistogramError, EXIT_FORMAT),
    (UnresolvableClustersError, EXIT_UNRESOLVABLE),
    (SearchLimitError, EXIT_SEARCH_LIMIT),
    (CountUnreachableError, EXIT_COUNT_UNREACHABLE),
    (DegenerateMixtureError, EXIT_DEGENERATE),
    (EmptyClusterError, EXIT_DEGENERATE),
    (DegenerateReferencesError, EXIT_DEGENERATE),
    (ScaleUnderflowError, EXIT_DEGENERATE),
    (InvalidArgumentError, EXIT_INVALID),
    (BracketError, EXIT_INVALID),
    (OSError, EXIT_IO),
)


def _write_json(payload, path):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _em_config(args):
    return kde.EmConfig(
        delta=args.delta,
        max_iterations=args.max_iterations,
        update_variance=not args.no_variance_update,
    )


def _add_em_flags(parser):
    parser.add_argument("--delta", type=float, default=1e-6,
                        help="EM convergence tolerance (default 1e-6)")
    parser.add_argument("--max-iterations", type=int, default=10000,
                        help="EM iteration cap (default 10000)")
    parser.add_argument("--no-variance-update", action="store_true",
                        help="keep the bandwidth fixed at its initial value")


def _cmd_kde(args):
    hist = histogram.read_csv(args.histogram)
    fit = kde.em_fit(hist, _em_config(args), trace_path=args.trace)
    with open(args.out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "beta"])
        for t, beta in zip(fit.model.centers, fit.model.weights):
            writer.writerow([repr(float(t)), repr(float(beta))])
    sidecar = {
        "sigma2": fit.model.variance,
        "bin_width": fit.model.bin_width,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "final_residual": fit.final_residual,
    }
    _write_json(sidecar, _sidecar_path(args.out))
    return EXIT_OK


def _sidecar_path(out):
    root, ext = os.path.splitext(out)
    return (root if ext else out) + ".json"


def _cmd_threshold(args):
    hist = histogram.read_csv(args.histogram)
    fit = kde.em_fit(hist, _em_config(args))
    detection = scalespace.detect_thresholds(
        fit.model, args.classes, args.dsigma2, args.max_steps, trace_path=args.trace
    )
    payload = {
        "thresholds": [float(v) for v in detection.thresholds],
        "scale_offset": detection.scale_offset,
        "direction": detection.direction,
        "steps": detection.steps,
        "refined": detection.refined,
        "sigma2_fit": fit.model.variance,
        "sigma2_final": fit.model.variance + detection.scale_offset,
        "em_iterations": fit.iterations,
        "em_converged": fit.converged,
    }
    _write_json(payload, args.out)
    if args.plot:
        final = kde.at_scale(fit.model, detection.scale_offset)
        grid = np.linspace(hist.centers[0], hist.centers[-1], 600)
        curves = [
            ("model (fitted scale)", grid, kde.evaluate(fit.model, grid)),
            ("model (resolved scale)", grid, kde.evaluate(final, grid)),
        ]
        plotting.render_threshold_svg(
            args.plot, hist, curves, detection.thresholds,
            title=f"{args.classes}-class thresholds",
        )
    return EXIT_OK


def _cmd_validate(args):
    threads = int(os.environ.get("HISTOSEG_THREADS", "1") or "1")
    report = synthetic.run_validation(
        args.cases,
        args.bins,
        samples_per_case=args.samples,
        dsigma2=args.dsigma2,
        seed=args.seed,
        threads=max(1, threads),
    )
    os.makedirs(args.out_dir, exist_ok=True)
    synthetic.write_summary_json(report, os.path.join(args.out_dir, "summary.json"))
    synthetic.write_cases_csv(report, os.path.join(args.out_dir, "cases.csv"))
    print(
        f"{report.summary.n_evaluated}/{report.summary.n_cases} cases evaluated, "
        f"deviation fraction {report.summary.deviation_fraction:.4f}"
    )
    return EXIT_OK


def _porosity_hist_csv(hist, report, path):
    """Porosity histogram: per-bin porosity value and probability mass."""
    phi = porosity.porosity_of_intensity(
        hist.centers, report.reference_void, report.reference_solid
    )
    mass = hist.densities * hist.bin_width
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["phi", "mass"])
        for p, m in zip(phi, mass):
            writer.writerow([repr(float(p)), repr(float(m))])


def _cmd_porosity(args):
    paths = sorted(glob.glob(args.stack_glob))
    if not paths:
        raise FileNotFoundError(f"no files match {args.stack_glob!r}")
    stack = porosity.load_stack(paths)
    hist = porosity.combined_histogram(stack, args.bins)
    report = porosity.estimate_porosity(
        hist, method=args.method, dsigma2=args.dsigma2, em_config=_em_config(args),
    )
    _write_json(porosity.report_to_dict(report), args.out)
    root, _ = os.path.splitext(args.out)
    _porosity_hist_csv(hist, report, root + ".porosity.csv")
    if args.compare:
        other = "kmeans" if args.method == "kde" else "kde"
        other_report = porosity.estimate_porosity(
            hist, method=other, dsigma2=args.dsigma2, em_config=_em_config(args),
        )
        with open(root + ".compare.csv", "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["method", "tau1", "tau2", "reference_void", "reference_solid",
                 "mean_porosity"]
            )
            for rep in (report, other_report):
                writer.writerow(
                    [rep.method, repr(rep.tau1), repr(rep.tau2),
                     repr(rep.reference_void), repr(rep.reference_solid),
                     repr(rep.mean_porosity)]
                )
    if args.plot:
        plotting.render_threshold_svg(
            args.plot, hist, [], [report.tau1, report.tau2],
            title=f"intensity histogram, {report.method} thresholds",
        )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="histoseg",
        description="histogram thresholding by KDE deconvolution and scale-space "
        "minima counting",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_kde = sub.add_parser("kde", help="fit the kernel-density model to a histogram CSV")
    p_kde.add_argument("histogram", help="input histogram CSV (columns t,h)")
    p_kde.add_argument("--out", required=True, help="output model CSV (columns t,beta)")
    p_kde.add_argument("--trace", default=None, help="per-iteration trace CSV")
    _add_em_flags(p_kde)
    p_kde.set_defaults(func=_cmd_kde)

    p_thr = sub.add_parser("threshold", help="compute C-class thresholds for a histogram CSV")
    p_thr.add_argument("histogram", help="input histogram CSV (columns t,h)")
    p_thr.add_argument("--classes", type=int, required=True, help="number of classes C")
    p_thr.add_argument("--out", required=True, help="output thresholds JSON")
    p_thr.add_argument("--dsigma2", type=float, default=0.01,
                       help="scale-walk step in variance units (default 0.01)")
    p_thr.add_argument("--max-steps", type=int, default=10000,
                       help="scale-walk step budget (default 10000)")
    p_thr.add_argument("--plot", default=None, help="optional SVG overlay plot")
    p_thr.add_argument("--trace", default=None, help="scale-walk trace CSV")
    _add_em_flags(p_thr)
    p_thr.set_defaults(func=_cmd_threshold)

    p_val = sub.add_parser("validate", help="run the synthetic-mixture validation batch")
    p_val.add_argument("--cases", type=int, required=True, help="number of seeded cases")
    p_val.add_argument("--bins", type=int, required=True, help="histogram bins per case")
    p_val.add_argument("--samples", type=int, default=10000,
                       help="samples per case (default 10000)")
    p_val.add_argument("--dsigma2", type=float, default=0.01,
                       help="scale-walk step (default 0.01)")
    p_val.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p_val.add_argument("--out-dir", required=True, help="output directory")
    p_val.set_defaults(func=_cmd_validate)

    p_por = sub.add_parser("porosity", help="estimate porosity of a PGM image stack")
    p_por.add_argument("stack_glob", help="glob matching the stack's PGM slices")
    p_por.add_argument("--out", required=True, help="output report JSON")
    p_por.add_argument("--method", choices=("kde", "kmeans"), default="kde",
                       help="thresholding method (default kde)")
    p_por.add_argument("--bins", type=int, default=1024,
                       help="intensity histogram bins (default 1024)")
    p_por.add_argument("--dsigma2", type=float, default=None,
                       help="scale-walk step; defaults to half the bin width")
    p_por.add_argument("--compare", action="store_true",
                       help="also run the other method and write a comparison CSV")
    p_por.add_argument("--plot", default=None, help="optional SVG overlay plot")
    _add_em_flags(p_por)
    p_por.set_defaults(func=_cmd_porosity)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        for exc_type, code in _ERROR_CODES:
            if isinstance(exc, exc_type):
                print(f"histoseg: error: {exc}", file=sys.stderr)
                return code
        raise
    return code


if __name__ == "__main__":
    sys.exit(main())
