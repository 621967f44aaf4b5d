"""Auxiliary-variable (y) subproblem: l1 shrinkage plus graph smoothing.

The y-subproblem of the outer ADMM::

    min_y  lmbda ||y||_1 + 1/2 E(y) + rho/2 ||x - y + u||^2

where ``E`` is the graph energy of the prior, is itself split as ``y = z``
and solved by an inner ADMM with penalty ``eta``: a soft-threshold step for
``y``, a linear solve ``(Q + eta I) z = eta (y + v)`` for ``z`` and a
multiplier update for ``v``. ``Q`` is never formed; conjugate gradient only
needs its action.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, ParameterError, SolverError

__all__ = [
    "CGConfig",
    "CGInfo",
    "InnerState",
    "soft_threshold",
    "y_update",
    "kron_operator_apply",
    "conjugate_gradient",
    "z_update",
    "inner_admm_step",
    "y_subproblem_objective",
]


@dataclass(frozen=True)
class CGConfig:
    """Conjugate gradient stopping rule and preconditioner choice."""

    tol: float = 1e-5
    max_iter: int = 500
    jacobi: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError("CG tolerance must be positive, got %r" % self.tol)
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ParameterError("CG max_iter must be an integer >= 1, got %r"
                                 % self.max_iter)


@dataclass
class CGInfo:
    """Outcome of a (batched) conjugate gradient solve.

    Attributes
    ----------
    iterations : int
        Number of operator applications performed after the initial residual.
    residual : ndarray
        Final relative residual ``||A x - b|| / ||b||`` of each system
        (0 for zero right-hand sides).
    """

    iterations: int
    residual: np.ndarray


@dataclass
class InnerState:
    """Persistent state of the inner ADMM, warm-started across outer iterations."""

    z: np.ndarray
    v: np.ndarray
    eta: float
    iterations: int = 0
    cg_iterations: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ParameterError("eta must be positive, got %r" % self.eta)
        if self.z.shape != self.v.shape:
            raise DimensionError("z and v shapes differ: %s vs %s"
                                 % (self.z.shape, self.v.shape))

    @classmethod
    def zeros(cls, shape, eta):
        return cls(np.zeros(shape), np.zeros(shape), eta)


def soft_threshold(v, t):
    """Elementwise ``sign(v) * max(|v| - t, 0)``, the proximal operator of ``t|.|``."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ParameterError("threshold must be nonnegative, got %r" % (t,))
    v = np.asarray(v, dtype=np.float64)
    out = np.sign(v) * np.maximum(np.abs(v) - t_arr, 0.0)
    return float(out) if out.ndim == 0 else out


def _check_shapes(*arrays):
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise DimensionError("inconsistent shapes %s and %s" % (shape, a.shape))


def y_update(x, u, z, v, lmbda, rho, eta):
    """Closed-form y-step of the inner ADMM.

    Minimises ``lmbda |y|_1 + rho/2 |x - y + u|^2 + eta/2 |y - z + v|^2``.
    """
    x, u, z, v = (np.asarray(a, dtype=np.float64) for a in (x, u, z, v))
    _check_shapes(x, u, z, v)
    if not lmbda >= 0:
        raise ParameterError("lambda must be nonnegative, got %r" % lmbda)
    if not (rho > 0 and eta > 0):
        raise ParameterError("rho and eta must be positive, got %r, %r" % (rho, eta))
    w = (rho * (x + u) + eta * (z - v)) / (rho + eta)
    return soft_threshold(w, lmbda / (rho + eta))


def kron_operator_apply(Z, prior, eta):
    """Apply ``Q + eta I`` to maps of shape ``(..., M, N)``."""
    Z = np.asarray(Z, dtype=np.float64)
    return prior.apply(Z) + eta * Z


def _dot(a, b):
    return np.sum(a * b, axis=(-2, -1))


def conjugate_gradient(A, b, x0=None, tol=1e-5, max_iter=500, precond=None,
                       callback=None):
    """Batched conjugate gradient for SPD systems acting on (K, M, N) maps.

    Each of the K systems ``A(x)[k] = b[k]`` is solved independently (the
    operator must not mix leading slices) and stops once its relative
    residual drops to `tol`. Zero right-hand sides yield zero solutions.

    Parameters
    ----------
    A : callable
        Linear SPD operator on arrays of the shape of `b`.
    b : ndarray
    x0 : ndarray, optional
        Initial guess.
    tol : float
    max_iter : int
    precond : ndarray, optional
        Diagonal of a Jacobi preconditioner, broadcastable against `b`.
    callback : callable, optional
        Called as ``callback(it, x)`` after every iteration.

    Returns
    -------
    x : ndarray
    info : CGInfo

    Raises
    ------
    SolverError
        If some system has not converged after `max_iter` iterations.
    """
    b = np.asarray(b, dtype=np.float64)
    squeeze = b.ndim == 2
    if squeeze:
        b = b[np.newaxis]
        x0 = None if x0 is None else np.asarray(x0)[np.newaxis]
    bnorm = np.sqrt(_dot(b, b))
    nonzero = bnorm > 0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    x[~nonzero] = 0.0
    safe_bnorm = np.where(nonzero, bnorm, 1.0)
    inv_m = None if precond is None else 1.0 / np.asarray(precond, dtype=np.float64)

    r = b - A(x)
    relres = np.where(nonzero, np.sqrt(_dot(r, r)) / safe_bnorm, 0.0)
    active = relres > tol
    it = 0
    if np.any(active):
        zr = r if inv_m is None else inv_m * r
        p = zr.copy()
        rz = _dot(r, zr)
        while it < max_iter:
            Ap = A(p)
            pAp = _dot(p, Ap)
            step = np.where(active, rz / np.where(active, pAp, 1.0), 0.0)
            x += step[:, None, None] * p
            r -= step[:, None, None] * Ap
            it += 1
            if callback is not None:
                callback(it, x[0] if squeeze else x)
            relres = np.where(nonzero, np.sqrt(_dot(r, r)) / safe_bnorm, 0.0)
            if np.all(relres[active] <= tol):
                # guard against drift of the recursively updated residual
                r = b - A(x)
                relres = np.where(nonzero, np.sqrt(_dot(r, r)) / safe_bnorm, 0.0)
                active = relres > tol
                if not np.any(active):
                    break
                zr = r if inv_m is None else inv_m * r
                p = zr.copy()
                rz = _dot(r, zr)
                continue
            active = active & (relres > tol)
            zr = r if inv_m is None else inv_m * r
            rz_new = _dot(r, zr)
            beta = np.where(active, rz_new / np.where(active, rz, 1.0), 0.0)
            p = zr + beta[:, None, None] * p
            rz = rz_new
        else:
            worst = float(np.max(relres))
            raise SolverError("conjugate gradient did not converge in %d iterations "
                              "(relative residual %.3e > %.1e)" % (max_iter, worst, tol),
                              residual=worst)
    info = CGInfo(iterations=it, residual=relres[0] if squeeze else relres)
    return (x[0] if squeeze else x), info


def z_update(y, v, prior, eta, cg=CGConfig(), z0=None, return_info=False):
    """Solve ``(Q + eta I) z_k = eta (y_k + v_k)`` for every map k by CG.

    Parameters
    ----------
    y, v : ndarray
        Maps of shape (K, M, N).
    prior : DualGraphPrior or PatchGraphPrior
        Supplies the action of ``Q``.
    eta : float
        Inner ADMM penalty; must be positive so the system is definite.
    cg : CGConfig
    z0 : ndarray, optional
        Warm start.
    return_info : bool
        Also return the :class:`CGInfo`.
    """
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_shapes(y, v)
    if not eta > 0:
        raise ParameterError("eta must be positive, got %r" % eta)
    b = eta * (y + v)
    precond = prior.diagonal() + eta if cg.jacobi else None
    z, info = conjugate_gradient(lambda Z: kron_operator_apply(Z, prior, eta), b,
                                 x0=z0, tol=cg.tol, max_iter=cg.max_iter,
                                 precond=precond)
    return (z, info) if return_info else z


def inner_admm_step(x, u, state, prior, lmbda, rho, cg=CGConfig(), sweeps=1):
    """Run `sweeps` rounds of the inner ADMM (y, then z, then v).

    Returns
    -------
    y : ndarray
        Latest auxiliary variable.
    state : InnerState
        Updated ``z``, ``v`` and counters; the input state is not modified.
    """
    if int(sweeps) != sweeps or sweeps < 1:
        raise ParameterError("sweeps must be an integer >= 1, got %r" % sweeps)
    z, v, eta = state.z, state.v, state.eta
    cg_its = 0
    for _ in range(int(sweeps)):
        y = y_update(x, u, z, v, lmbda, rho, eta)
        z, info = z_update(y, v, prior, eta, cg, z0=z, return_info=True)
        v = v + y - z
        cg_its += info.iterations
    return y, replace(state, z=z, v=v, iterations=state.iterations + int(sweeps),
                      cg_iterations=state.cg_iterations + cg_its)


def y_subproblem_objective(y, x, u, prior, lmbda, rho):
    """Value of ``lmbda |y|_1 + 1/2 E(y) + rho/2 |x - y + u|^2``."""
    y = np.asarray(y, dtype=np.float64)
    r = x - y + u
    return float(lmbda * np.sum(np.abs(y)) + 0.5 * prior.energy(y)
                 + 0.5 * rho * np.sum(r * r))
