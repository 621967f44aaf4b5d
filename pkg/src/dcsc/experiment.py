"""Denoising experiment plans and the benchmark sweep.

A plan file is UTF-8 text with one ``key = value`` pair per line; ``#``
starts a comment and list values are comma separated::

    images = images/            # directory or comma-separated file list
    dictionary = fallback:36,12,0
    sigmas = 15, 20, 25, 30, 35
    seeds = 0
    variants = csc, scsc, dcsc
    max_iter = 50

Relative paths are resolved against the plan file's directory. Any other
recognised key overrides the matching :class:`~dcsc.solver.SolverConfig`
field (see ``SOLVER_KEYS``).
"""

import csv
import itertools
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import fallback_dictionary, load_dictionary
from .errors import DCSCError, ParameterError
from .graph import GraphConfig
from .imageio import IMAGE_SUFFIXES, center_crop, read_image
from .metrics import NoiseSpec, add_gaussian_noise, format_db, psnr
from .regularizers import CGConfig
from .solver import VARIANTS, SolverConfig, denoise

log = logging.getLogger(__name__)

__all__ = [
    "PlanError",
    "ExperimentPlan",
    "ResultRow",
    "parse_plan",
    "format_plan",
    "parse_dict_source",
    "load_dict_source",
    "build_solver_config",
    "run_benchmark",
    "RESULTS_HEADER",
]

RESULTS_HEADER = ("image", "variant", "sigma", "seed", "psnr_noisy", "psnr_denoised",
                  "iterations", "error")
AVERAGES_HEADER = ("variant", "sigma", "n", "psnr_noisy", "psnr_denoised")

# plan key -> (SolverConfig / sub-config field, converter)
SOLVER_KEYS = {
    "lambda": ("lmbda", float),
    "mu": ("mu", float),
    "alpha": ("alpha", float),
    "beta": ("beta", float),
    "rho": ("rho", float),
    "eta": ("eta", float),
    "inner_sweeps": ("inner_sweeps", int),
    "lowpass": ("lowpass", float),
    "eps_primal": ("eps_primal", float),
    "eps_dual": ("eps_dual", float),
    "cg_tol": ("cg.tol", float),
    "cg_max_iter": ("cg.max_iter", int),
    "jacobi": ("cg.jacobi", None),
    "delta": ("graph.delta", float),
    "radius": ("graph.radius", int),
    "patch_size": ("graph.patch_size", int),
    "knn": ("graph.knn", int),
}
PLAN_KEYS = ("images", "dictionary", "sigmas", "seeds", "variants", "max_iter",
             "output", "max_size", "pad") + tuple(SOLVER_KEYS)


class PlanError(DCSCError, ValueError):
    """Syntax or validation error in a plan file."""


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean, got %r" % text)


@dataclass
class ExperimentPlan:
    """A validated benchmark sweep."""

    images: list
    dictionary: str = "fallback:36,12,0"
    sigmas: list = field(default_factory=lambda: [20.0])
    seeds: list = field(default_factory=lambda: [0])
    variants: list = field(default_factory=lambda: ["dcsc"])
    max_iter: int = 50
    output: str = None
    max_size: int = 512
    pad: bool = False
    overrides: dict = field(default_factory=dict)

    def validate(self):
        """Raise :class:`PlanError` listing every violated invariant."""
        problems = []
        if not self.images:
            problems.append("images: at least one image is required")
        if not self.sigmas:
            problems.append("sigmas: at least one noise level is required")
        for s in self.sigmas:
            if not (s >= 0 and math.isfinite(s)):
                problems.append("sigmas: noise level must be finite and >= 0, got %g" % s)
        if not self.seeds:
            problems.append("seeds: at least one seed is required")
        for s in self.seeds:
            if not 0 <= s < 2**64:
                problems.append("seeds: seed must be an unsigned 64-bit integer, got %d" % s)
        if not self.variants:
            problems.append("variants: at least one variant is required")
        for v in self.variants:
            if v not in VARIANTS:
                problems.append("variants: unknown variant %r (expected %s)"
                                % (v, ", ".join(VARIANTS)))
        if self.max_iter < 1:
            problems.append("max_iter: must be >= 1, got %d" % self.max_iter)
        if self.max_size < 1:
            problems.append("max_size: must be >= 1, got %d" % self.max_size)
        try:
            parse_dict_source(self.dictionary)
        except ParameterError as e:
            problems.append("dictionary: %s" % e)
        try:
            build_solver_config(self.variants[0] if self.variants and
                                self.variants[0] in VARIANTS else "csc",
                                self.overrides, self.max_iter if self.max_iter >= 1 else 1)
        except (ParameterError, ValueError) as e:
            problems.append("solver settings: %s" % e)
        if problems:
            raise PlanError("invalid plan:\n  " + "\n  ".join(problems))
        return self


@dataclass
class ResultRow:
    """One (image, variant, sigma, seed) outcome of a benchmark."""

    image: str
    variant: str
    sigma: float
    seed: int
    psnr_noisy: float = math.nan
    psnr_denoised: float = math.nan
    iterations: int = 0
    wall_ms: float = 0.0
    error: str = ""

    def csv_fields(self):
        return [self.image, self.variant, "%g" % self.sigma, str(self.seed),
                format_db(self.psnr_noisy), format_db(self.psnr_denoised),
                str(self.iterations), self.error]


def _split_list(value):
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_plan(path):
    """Read and validate a plan file.

    Raises
    ------
    PlanError
        With line and column for syntax errors and unknown or repeated keys,
        or with the full list of semantic violations.
    OSError
        If the file cannot be read.
    """
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    base = os.path.dirname(os.path.abspath(path))
    raw = {}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0]
        if not text.strip():
            continue
        if "=" not in text:
            col = len(text) - len(text.lstrip()) + 1
            raise PlanError("%s:%d:%d: expected 'key = value'" % (path, lineno, col))
        key, value = text.split("=", 1)
        col = len(key) - len(key.lstrip()) + 1
        key = key.strip()
        if not key:
            raise PlanError("%s:%d:%d: missing key before '='" % (path, lineno, col))
        if key not in PLAN_KEYS:
            raise PlanError("%s:%d:%d: unknown key %r" % (path, lineno, col, key))
        if key in raw:
            raise PlanError("%s:%d:%d: duplicate key %r (first set on line %d)"
                            % (path, lineno, col, key, raw[key][1]))
        vcol = len(text.split("=", 1)[0]) + 2 + (len(value) - len(value.lstrip()))
        raw[key] = (value.strip(), lineno, vcol)

    def convert(key, fn):
        value, lineno, col = raw[key]
        try:
            return fn(value)
        except ValueError as e:
            raise PlanError("%s:%d:%d: bad value for %s: %s" % (path, lineno, col, key, e))

    kwargs = {}
    if "images" in raw:
        kwargs["images"] = convert("images", lambda v: _expand_images(v, base))
    else:
        kwargs["images"] = []
    if "dictionary" in raw:
        kwargs["dictionary"] = convert(
            "dictionary", lambda v: v if v.startswith("fallback:") else _resolve(v, base))
    if "sigmas" in raw:
        kwargs["sigmas"] = convert("sigmas", lambda v: [float(s) for s in _split_list(v)])
    if "seeds" in raw:
        kwargs["seeds"] = convert("seeds", lambda v: [int(s) for s in _split_list(v)])
    if "variants" in raw:
        kwargs["variants"] = convert("variants",
                                     lambda v: [s.lower() for s in _split_list(v)])
    for key in ("max_iter", "max_size"):
        if key in raw:
            kwargs[key] = convert(key, int)
    if "pad" in raw:
        kwargs["pad"] = convert("pad", _parse_bool)
    if "output" in raw:
        kwargs["output"] = convert("output", lambda v: _resolve(v, base))
    overrides = {}
    for key, (_, fn) in SOLVER_KEYS.items():
        if key in raw:
            overrides[key] = convert(key, fn or _parse_bool)
    kwargs["overrides"] = overrides
    return ExperimentPlan(**kwargs).validate()


def _resolve(p, base):
    return p if os.path.isabs(p) else os.path.normpath(os.path.join(base, p))


def _expand_images(value, base):
    out = []
    for item in _split_list(value):
        p = _resolve(item, base)
        if os.path.isdir(p):
            found = sorted(os.path.join(p, n) for n in os.listdir(p)
                           if os.path.splitext(n)[1].lower() in IMAGE_SUFFIXES)
            if not found:
                raise ValueError("directory %s contains no .png/.pgm images" % p)
            out.extend(found)
        else:
            out.append(p)
    return out


def format_plan(plan):
    """Render a plan back to the key-value format (used by ``--print-plan``)."""
    lines = [
        "images = %s" % ", ".join(plan.images),
        "dictionary = %s" % plan.dictionary,
        "sigmas = %s" % ", ".join("%g" % s for s in plan.sigmas),
        "seeds = %s" % ", ".join(str(s) for s in plan.seeds),
        "variants = %s" % ", ".join(plan.variants),
        "max_iter = %d" % plan.max_iter,
        "max_size = %d" % plan.max_size,
        "pad = %s" % ("true" if plan.pad else "false"),
    ]
    if plan.output:
        lines.append("output = %s" % plan.output)
    for key in SOLVER_KEYS:
        if key in plan.overrides:
            val = plan.overrides[key]
            lines.append("%s = %s" % (key, str(val).lower() if isinstance(val, bool)
                                      else "%g" % val))
    return "\n".join(lines) + "\n"


def parse_dict_source(source):
    """Split a dictionary source into ``("fallback", (K, p, seed))`` or ``("file", path)``."""
    if source.startswith("fallback:"):
        try:
            K, p, seed = (int(t) for t in source[len("fallback:"):].split(","))
        except ValueError:
            raise ParameterError("fallback dictionary must be 'fallback:K,p,seed', got %r"
                                 % source)
        if K < 1 or p < 2 or seed < 0:
            raise ParameterError("fallback dictionary needs K >= 1, p >= 2, seed >= 0, "
                                 "got %r" % source)
        return "fallback", (K, p, seed)
    return "file", source


def load_dict_source(source):
    """Load the dictionary named by `source` (see :func:`parse_dict_source`)."""
    kind, arg = parse_dict_source(source)
    if kind == "fallback":
        return fallback_dictionary(*arg)
    if not os.path.isfile(arg):
        raise FileNotFoundError("dictionary file not found: %s" % arg)
    return load_dictionary(arg)


def build_solver_config(variant, overrides=None, max_iter=50):
    """SolverConfig for `variant` with plan/CLI `overrides` keyed as in ``SOLVER_KEYS``."""
    top, cg, graph = {}, {}, {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        target = SOLVER_KEYS[key][0]
        if target.startswith("cg."):
            cg[target[3:]] = value
        elif target.startswith("graph."):
            graph[target[6:]] = value
        else:
            top[target] = value
    return SolverConfig(variant=variant, max_iter=max_iter, cg=CGConfig(**cg),
                        graph=GraphConfig(**graph), **top)


def _run_row(task):
    image_path, image_id, variant, sigma, seed, dict_source, cfg, max_size, pad = task
    row = ResultRow(image_id, variant, sigma, seed)
    t0 = time.perf_counter()
    try:
        clean = read_image(image_path)
        if max_size:
            clean = center_crop(clean, max_size)
        noisy = add_gaussian_noise(clean, NoiseSpec(sigma, seed))
        dictionary = load_dict_source(dict_source)
        result, restored = denoise(noisy, dictionary, cfg, pad=pad)
        row.psnr_noisy = psnr(noisy, clean)
        row.psnr_denoised = psnr(restored, clean)
        row.iterations = result.iterations
    except (DCSCError, OSError, ValueError) as e:
        log.error("%s / %s / sigma=%g / seed=%d failed: %s",
                  image_id, variant, sigma, seed, e)
        row.error = "%s: %s" % (type(e).__name__, str(e).replace("\n", " "))
    row.wall_ms = 1e3 * (time.perf_counter() - t0)
    return row


def _image_ids(paths):
    stems = [os.path.splitext(os.path.basename(p))[0] for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [os.path.relpath(p) for p in paths]


def run_benchmark(plan, out_dir, max_iter=None, jobs=1, full_size=False):
    """Run every (image, sigma, seed, variant) combination of `plan`.

    Writes into `out_dir`:

    ``results.csv``
        one row per combination (deterministic for a fixed plan)
    ``averages.csv``
        mean PSNRs per (variant, sigma) over successful rows
    ``table.md``
        the averages as a sigma-by-variant Markdown table
    ``fig1.csv``
        average denoised PSNR against sigma for ``dcsc`` and ``scsc``
    ``timings.csv``
        wall time per row (kept apart so results.csv stays reproducible)

    Returns
    -------
    list of ResultRow
    """
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError("output directory %s is not writable" % out_dir)
    n_iter = max_iter or plan.max_iter
    max_size = None if full_size else plan.max_size
    ids = _image_ids(plan.images)
    cfgs = {v: build_solver_config(v, plan.overrides, n_iter) for v in plan.variants}
    tasks = [(path, image_id, v, float(sigma), int(seed), plan.dictionary, cfgs[v],
              max_size, plan.pad)
             for (path, image_id), sigma, seed, v in itertools.product(
                 zip(plan.images, ids), plan.sigmas, plan.seeds, plan.variants)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_row, tasks))
    else:
        rows = [_run_row(t) for t in tasks]

    _write_csv(os.path.join(out_dir, "results.csv"), RESULTS_HEADER,
               [r.csv_fields() for r in rows])
    _write_csv(os.path.join(out_dir, "timings.csv"),
               ("image", "variant", "sigma", "seed", "wall_ms"),
               [[r.image, r.variant, "%g" % r.sigma, r.seed, "%.1f" % r.wall_ms]
                for r in rows])
    averages = _averages(rows, plan)
    _write_csv(os.path.join(out_dir, "averages.csv"), AVERAGES_HEADER,
               [[v, "%g" % s, n, format_db(a), format_db(b)]
                for (v, s), (n, a, b) in averages.items()])
    _write_table(os.path.join(out_dir, "table.md"), averages, plan)
    _write_csv(os.path.join(out_dir, "fig1.csv"), ("sigma", "dcsc", "scsc"),
               [["%g" % s] + [format_db(averages[(v, s)][2]) if (v, s) in averages
                              else "" for v in ("dcsc", "scsc")]
                for s in plan.sigmas])
    return rows


def _averages(rows, plan):
    out = {}
    for v in plan.variants:
        for s in plan.sigmas:
            ok = [r for r in rows if r.variant == v and r.sigma == s and not r.error]
            if ok:
                out[(v, s)] = (len(ok), float(np.mean([r.psnr_noisy for r in ok])),
                               float(np.mean([r.psnr_denoised for r in ok])))
            else:
                out[(v, s)] = (0, math.nan, math.nan)
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_table(path, averages, plan):
    head = ["sigma", "noisy"] + [v.upper() for v in plan.variants]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for s in plan.sigmas:
        noisy = [averages[(v, s)][1] for v in plan.variants
                 if not math.isnan(averages[(v, s)][1])]
        cells = ["%g" % s, format_db(noisy[0]) if noisy else "-"]
        for v in plan.variants:
            n, _, b = averages[(v, s)]
            cells.append(format_db(b) if n else "-")
        lines.append("| " + " | ".join(cells) + " |")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
