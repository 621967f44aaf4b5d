"""Command-line interface.

Subcommands::

    dcsc denoise <image> --dict <path|fallback:K,p,seed> [--sigma S --seed N ...]
    dcsc benchmark --plan <file> --out <dir> [--max-iter N] [--jobs J]
    dcsc make-dict --k K --p P --seed S --out <file>

Every ``denoise`` option can also be set through an environment variable
named ``DCSC_`` followed by the option name in upper case with dashes
replaced by underscores, e.g. ``DCSC_LAMBDA=0.3`` or ``DCSC_MAX_ITER=25``.
Command-line flags take precedence.

Exit status is 0 on success, 1 when the solver fails and 2 for I/O or
configuration errors.
"""

import argparse
import logging
import os
import sys

from . import __version__
from .core import fallback_dictionary, save_dictionary
from .errors import DCSCError, SolverError
from .experiment import (PlanError, build_solver_config, format_plan, load_dict_source,
                         parse_plan, run_benchmark)
from .graph import dump_graph_csv
from .imageio import center_crop, read_image, write_image
from .metrics import NoiseSpec, add_gaussian_noise, format_db, psnr
from .solver import VARIANTS, build_prior, denoise, write_trace_csv

log = logging.getLogger("dcsc")

ENV_PREFIX = "DCSC_"
EXIT_OK, EXIT_SOLVER, EXIT_IO = 0, 1, 2


def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def _add(parser, flag, **kwargs):
    name = flag.lstrip("-")
    kwargs["default"] = _env(name, kwargs.get("default"))
    parser.add_argument(flag, **kwargs)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dcsc", description="Convolutional sparse coding denoiser with "
        "dual graph Laplacian regularisation.")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("denoise", help="denoise one image")
    d.add_argument("image")
    _add(d, "--dict", default="fallback:36,12,0", metavar="SOURCE",
         help="dictionary file or fallback:K,p,seed (default %(default)s)")
    _add(d, "--sigma", type=float, default=0.0,
         help="std of synthetic Gaussian noise added to the input first")
    _add(d, "--seed", type=int, default=0, help="noise seed")
    _add(d, "--variant", type=str.lower, choices=VARIANTS, default="dcsc")
    _add(d, "--lambda", dest="lmbda", type=float)
    _add(d, "--alpha", type=float)
    _add(d, "--beta", type=float)
    _add(d, "--mu", type=float)
    _add(d, "--rho", type=float)
    _add(d, "--eta", type=float)
    _add(d, "--max-iter", type=int, default=50)
    _add(d, "--inner-sweeps", type=int)
    _add(d, "--cg-tol", type=float)
    _add(d, "--lowpass", type=float)
    _add(d, "--radius", type=int)
    _add(d, "--delta", type=float)
    _add(d, "--out", default=".", help="output directory")
    _add(d, "--clean", help="clean reference image for PSNR")
    _add(d, "--format", choices=("png", "pgm"), default="png")
    _add(d, "--max-size", type=int, default=512,
         help="center-crop larger images to this size")
    d.add_argument("--full-size", action="store_true", help="disable cropping")
    d.add_argument("--pad", action="store_true",
                   help="pad by reflection before solving and crop afterwards")
    d.add_argument("--dump-graphs", action="store_true",
                   help="write graph weights and Laplacians as CSV triples")
    d.set_defaults(func=cmd_denoise)

    b = sub.add_parser("benchmark", help="run a noise/variant sweep from a plan file")
    b.add_argument("--plan", required=True)
    b.add_argument("--out", help="output directory (defaults to the plan's 'output')")
    b.add_argument("--max-iter", type=int, help="override the plan's iteration budget")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--full-size", action="store_true")
    b.add_argument("--print-plan", action="store_true",
                   help="print the validated plan and exit")
    b.set_defaults(func=cmd_benchmark)

    m = sub.add_parser("make-dict", help="write a fallback dictionary file")
    m.add_argument("--k", type=int, default=36)
    m.add_argument("--p", type=int, default=12)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_make_dict)
    return parser


_OVERRIDE_ARGS = {"lmbda": "lambda", "alpha": "alpha", "beta": "beta", "mu": "mu",
                  "rho": "rho", "eta": "eta", "inner_sweeps": "inner_sweeps",
                  "cg_tol": "cg_tol", "lowpass": "lowpass", "radius": "radius",
                  "delta": "delta"}


def cmd_denoise(args):
    dictionary = load_dict_source(args.dict)
    image = read_image(args.image)
    if not args.full_size:
        image = center_crop(image, args.max_size)
    noisy = add_gaussian_noise(image, NoiseSpec(args.sigma, args.seed))
    reference = None
    if args.clean:
        reference = read_image(args.clean)
        if not args.full_size:
            reference = center_crop(reference, args.max_size)
    elif args.sigma > 0:
        reference = image
    overrides = {key: getattr(args, attr) for attr, key in _OVERRIDE_ARGS.items()}
    cfg = build_solver_config(args.variant, overrides, args.max_iter)

    os.makedirs(args.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.image))[0]
    result, restored = denoise(noisy, dictionary, cfg, pad=args.pad)
    write_image(restored, os.path.join(args.out, "%s_denoised.%s" % (stem, args.format)))
    if args.sigma > 0:
        write_image(noisy, os.path.join(args.out, "%s_noisy.%s" % (stem, args.format)))
    write_trace_csv(result.trace, os.path.join(args.out, "%s_trace.csv" % stem))
    if args.dump_graphs and cfg.variant != "csc":
        prior = build_prior(noisy, cfg)
        graphs = ({"column": prior.column, "row": prior.row} if cfg.variant == "dcsc"
                  else {"patch": prior.graph.laplacian})
        for name, g in graphs.items():
            for which in ("W", "L"):
                dump_graph_csv(g, os.path.join(args.out, "%s_%s_%s.csv"
                                               % (stem, name, which)), which)

    summary = "image=%s variant=%s sigma=%g seed=%d iterations=%d converged=%s" % (
        stem, cfg.variant, args.sigma, args.seed, result.iterations,
        str(result.converged).lower())
    if reference is not None:
        summary += " psnr_noisy=%s psnr_denoised=%s" % (
            format_db(psnr(noisy, reference)), format_db(psnr(restored, reference)))
    print(summary)
    return EXIT_OK


def cmd_benchmark(args):
    plan = parse_plan(args.plan)
    if args.print_plan:
        sys.stdout.write(format_plan(plan))
        return EXIT_OK
    out = args.out or plan.output
    if not out:
        raise PlanError("no output directory: pass --out or set 'output' in the plan")
    rows = run_benchmark(plan, out, max_iter=args.max_iter, jobs=args.jobs,
                         full_size=args.full_size)
    failed = [r for r in rows if r.error]
    print("%d rows written to %s (%d failed)" % (len(rows), out, len(failed)))
    if failed:
        solver_failure = any(r.error.startswith("SolverError") for r in failed)
        return EXIT_SOLVER if solver_failure else EXIT_IO
    return EXIT_OK


def cmd_make_dict(args):
    save_dictionary(fallback_dictionary(args.k, args.p, args.seed), args.out)
    print("wrote K=%d p=%d dictionary to %s" % (args.k, args.p, args.out))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SolverError as e:
        print("dcsc: solver failure: %s" % e, file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, DCSCError, ValueError) as e:
        print("dcsc: error: %s" % e, file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
