"""Outer ADMM for convolutional sparse coding with optional graph priors.

Three models share one solver:

``csc``
    ``1/2 |sum_k d_k * x_k - s|^2 + lmbda sum_k |x_k|_1``
``scsc``
    adds ``mu/2 sum_k <x_k, L x_k>`` for a non-local patch graph ``L``
``dcsc``
    adds ``alpha/2 sum_k tr(x_k L_c x_k^T) + beta/2 sum_k tr(x_k^T L_r x_k)``
    for a column graph ``L_c`` and a row graph ``L_r``

The splitting ``x = y`` gives an x-step solved per DFT bin
(:mod:`dcsc.freq`), a y-step handled by an inner ADMM
(:mod:`dcsc.regularizers`), and a scaled multiplier update
``u <- u + x - y``. When the graph term is absent or has zero weight the
y-step is solved exactly by soft thresholding instead.
"""

import collections
import csv
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Dictionary, DictionaryFreq, as_coeffs, as_image, lowpass_split
from .errors import DimensionError, ParameterError, SolverError
from .freq import XUpdateWorkspace, x_update
from .graph import (DualGraphPrior, GraphConfig, PatchGraphPrior, build_line_graph,
                    build_patch_graph)
from .regularizers import CGConfig, InnerState, inner_admm_step, soft_threshold

__all__ = [
    "VARIANTS",
    "SolverConfig",
    "SolveResult",
    "IterationStats",
    "build_prior",
    "objective_value",
    "residuals",
    "solve",
    "denoise",
    "write_trace_csv",
]

log = logging.getLogger(__name__)

VARIANTS = ("csc", "scsc", "dcsc")

IterationStats = collections.namedtuple(
    "IterationStats",
    ["iteration", "objective", "primal", "dual", "cg_iterations", "elapsed_ms"])
IterationStats.__doc__ = """Per-iteration record of :func:`solve`.

``cg_iterations`` counts the conjugate gradient iterations spent in that
outer iteration; ``elapsed_ms`` is wall time since the start of the solve.
"""

TRACE_HEADER = ("iteration", "objective", "primal", "dual", "cg_iters_total",
                "elapsed_ms")


def _normalize_variant(variant):
    v = str(variant).lower()
    if v not in VARIANTS:
        raise ParameterError("unknown variant %r, expected one of %s"
                             % (variant, ", ".join(VARIANTS)))
    return v


@dataclass(frozen=True)
class SolverConfig:
    """All scalar settings of a solve.

    `rho` defaults to ``10 * lmbda + 1`` when left as ``None``.
    """

    variant: str = "dcsc"
    lmbda: float = 0.28
    mu: float = 0.1
    alpha: float = 0.2
    beta: float = 0.2
    rho: float = None
    eta: float = 1.0
    max_iter: int = 50
    inner_sweeps: int = 1
    cg: CGConfig = field(default_factory=CGConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    eps_primal: float = 1e-4
    eps_dual: float = 1e-4
    lowpass: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "variant", _normalize_variant(self.variant))
        for name in ("lmbda", "mu", "alpha", "beta"):
            if not getattr(self, name) >= 0:
                raise ParameterError("%s must be nonnegative, got %r"
                                     % (name, getattr(self, name)))
        if self.rho is None:
            object.__setattr__(self, "rho", 10.0 * self.lmbda + 1.0)
        for name in ("rho", "eta", "lowpass"):
            if not getattr(self, name) > 0:
                raise ParameterError("%s must be positive, got %r"
                                     % (name, getattr(self, name)))
        for name in ("max_iter", "inner_sweeps"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ParameterError("%s must be an integer >= 1, got %r" % (name, val))
        for name in ("eps_primal", "eps_dual"):
            if not getattr(self, name) >= 0:
                raise ParameterError("%s must be nonnegative, got %r"
                                     % (name, getattr(self, name)))


@dataclass
class SolveResult:
    """Output of :func:`solve`.

    Attributes
    ----------
    x : ndarray
        Coefficient maps, shape (K, M, N).
    y : ndarray
        Auxiliary (sparse) coefficient maps at the last iteration.
    reconstruction : ndarray
        ``sum_k d_k * x_k`` plus the lowpass component.
    lowpass : ndarray
        Smooth component removed before sparse coding.
    trace : list of IterationStats
    iterations : int
    converged : bool
        True when the residual tolerances were met before the iteration cap.
    """

    x: np.ndarray
    y: np.ndarray
    reconstruction: np.ndarray
    lowpass: np.ndarray
    trace: list
    iterations: int
    converged: bool


def _line_cfg(cfg, n):
    r = max(1, min(cfg.radius, n - 1))
    if r != cfg.radius:
        log.debug("clamping graph radius %d to %d for %d vertices", cfg.radius, r, n)
        cfg = replace(cfg, radius=r)
    return cfg


def build_prior(s, cfg):
    """Graph prior for `cfg.variant` built from image `s`, or None for plain CSC."""
    s = as_image(s)
    M, N = s.shape
    if cfg.variant == "dcsc":
        Lc = build_line_graph(s, "columns", _line_cfg(cfg.graph, N))
        Lr = build_line_graph(s, "rows", _line_cfg(cfg.graph, M))
        return DualGraphPrior(Lc, Lr, cfg.alpha, cfg.beta)
    if cfg.variant == "scsc":
        gcfg = cfg.graph
        if gcfg.patch_size > min(M, N):
            log.debug("clamping patch size %d to %d", gcfg.patch_size, min(M, N))
            gcfg = replace(gcfg, patch_size=min(M, N))
        return PatchGraphPrior(build_patch_graph(s, gcfg), cfg.mu)
    return None


def objective_value(x, s, dictionary, cfg, prior=None):
    """Model objective at coefficient maps `x` for target signal `s`.

    The graph term is included for ``scsc`` and ``dcsc`` and ignored for
    ``csc`` even if a prior is supplied.
    """
    s = as_image(s, "signal")
    if isinstance(dictionary, Dictionary):
        dictionary = DictionaryFreq(dictionary, s.shape)
    elif dictionary.shape != s.shape:
        raise DimensionError("dictionary transform shape %s does not match signal %s"
                             % (dictionary.shape, s.shape))
    x = as_coeffs(x, K=dictionary.K, shape=s.shape)
    r = dictionary.synthesize(x) - s
    val = 0.5 * float(np.sum(r * r)) + cfg.lmbda * float(np.sum(np.abs(x)))
    if cfg.variant == "csc":
        return val
    expected = DualGraphPrior if cfg.variant == "dcsc" else PatchGraphPrior
    if not isinstance(prior, expected):
        raise ParameterError("variant %s requires a %s, got %r"
                             % (cfg.variant, expected.__name__, type(prior).__name__))
    if prior.shape != s.shape:
        raise DimensionError("prior dimensions %s do not match signal %s"
                             % (prior.shape, s.shape))
    return val + 0.5 * prior.energy(x)


def residuals(x, y, y_prev, u, rho):
    """Normalised primal and dual residuals of the outer ADMM.

    ``primal = |x - y| / max(|x|, |y|, 1e-12)`` and
    ``dual = rho |y - y_prev| / max(rho |u|, 1e-12)``, all Frobenius norms.
    """
    nx, ny, nu = np.linalg.norm(x), np.linalg.norm(y), np.linalg.norm(u)
    primal = float(np.linalg.norm(x - y) / max(nx, ny, 1e-12))
    dual = float(rho * np.linalg.norm(y - y_prev) / max(rho * nu, 1e-12))
    return primal, dual


def solve(s, dictionary, cfg=SolverConfig(), callback=None):
    """Sparse-code image `s` over `dictionary` under the model in `cfg`.

    Graphs are built once from the full input image. The lowpass component
    is split off first; the sparse code models the remainder and the
    lowpass is added back to the reconstruction.

    Parameters
    ----------
    s : array_like
        Input image of shape (M, N).
    dictionary : Dictionary
    cfg : SolverConfig
    callback : callable, optional
        Called after every outer iteration with keyword arguments
        ``iteration, x, y, y_prev, u, u_prev``. The arrays must not be modified.

    Returns
    -------
    SolveResult
    """
    s = as_image(s)
    M, N = s.shape
    if dictionary.p > min(M, N):
        raise DimensionError("filter size %d exceeds image size %s" % (dictionary.p, s.shape))
    t0 = time.perf_counter()
    low, high = lowpass_split(s, cfg.lowpass)
    prior = build_prior(s, cfg)
    dfreq = DictionaryFreq(dictionary, s.shape)
    ws = XUpdateWorkspace(dfreq, high, cfg.rho)
    shape = (dictionary.K, M, N)
    x = np.zeros(shape)
    y = np.zeros(shape)
    u = np.zeros(shape)
    inner = InnerState.zeros(shape, cfg.eta)
    exact_prox = prior is None or prior.inert
    trace = []
    converged = False

    for it in range(1, cfg.max_iter + 1):
        x = x_update(ws, y, u)
        y_prev = y
        cg_before = inner.cg_iterations
        if exact_prox:
            y = soft_threshold(x + u, cfg.lmbda / cfg.rho)
        else:
            y, inner = inner_admm_step(x, u, inner, prior, cfg.lmbda, cfg.rho,
                                       cfg.cg, cfg.inner_sweeps)
        u_prev = u
        u = u + x - y
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))
                and np.all(np.isfinite(u))):
            raise SolverError("non-finite iterate at outer iteration %d" % it)
        obj = objective_value(x, high, dfreq, cfg, prior)
        primal, dual = residuals(x, y, y_prev, u, cfg.rho)
        elapsed = 1e3 * (time.perf_counter() - t0)
        trace.append(IterationStats(it, obj, primal, dual,
                                    inner.cg_iterations - cg_before, elapsed))
        log.debug("iter %3d  obj %.6e  primal %.3e  dual %.3e", it, obj, primal, dual)
        if callback is not None:
            callback(iteration=it, x=x, y=y, y_prev=y_prev, u=u, u_prev=u_prev)
        if primal <= cfg.eps_primal and dual <= cfg.eps_dual:
            converged = True
            break

    recon = dfreq.synthesize(x) + low
    return SolveResult(x=x, y=y, reconstruction=recon, lowpass=low, trace=trace,
                       iterations=len(trace), converged=converged)


def denoise(image, dictionary, cfg=SolverConfig(), pad=False):
    """Solve and return ``(result, restored_image)``.

    With `pad`, the image is extended by ``p`` pixels of symmetric reflection
    on every side before solving and the reconstruction is cropped back, which
    hides wrap-around artefacts of the circular boundary.
    """
    image = as_image(image)
    if not pad:
        result = solve(image, dictionary, cfg)
        return result, result.reconstruction
    p = dictionary.p
    padded = np.pad(image, p, mode="symmetric")
    result = solve(padded, dictionary, cfg)
    return result, result.reconstruction[p:-p, p:-p]


def write_trace_csv(trace, path):
    """Write an iteration trace as CSV with the columns of ``TRACE_HEADER``."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for t in trace:
            w.writerow([t.iteration, "%.10e" % t.objective, "%.6e" % t.primal,
                        "%.6e" % t.dual, t.cg_iterations, "%.3f" % t.elapsed_ms])
