"""Frequency-domain solution of the coefficient-map (x) subproblem.

The x-step of the outer ADMM minimises::

    1/2 || sum_k d_k * x_k - s ||^2 + rho/2 sum_k || x_k - y_k + u_k ||^2

Under circular convolution every DFT bin decouples into a K-dimensional
system ``(a^H a + rho I) x = a^H s + rho (y - u)`` where ``a`` is the row of
filter transforms at that bin. The rank-one structure lets Sherman-Morrison
solve each bin in O(K).
"""

import numpy as np

from .core import DictionaryFreq, as_coeffs, as_image
from .errors import DimensionError, ParameterError

__all__ = ["XUpdateWorkspace", "x_update", "solve_bins"]


def solve_bins(Df, energy, b, rho):
    """Solve ``(conj(a) a^T + rho I) x = b`` independently at every bin.

    Parameters
    ----------
    Df : ndarray
        Filter transforms, shape ``(K, ...)``.
    energy : ndarray
        ``sum_k |Df_k|**2``, shape ``(...)``.
    b : ndarray
        Right-hand sides, shape ``(K, ...)``.
    rho : float
    """
    ab = np.sum(Df * b, axis=0)
    return (b - np.conj(Df) * (ab / (rho + energy))[np.newaxis]) / rho


class XUpdateWorkspace:
    """Cached transforms for repeated x-updates against one signal.

    Parameters
    ----------
    dfreq : DictionaryFreq
        Dictionary transforms matching the signal shape.
    s : ndarray
        Target signal of shape (M, N).
    rho : float
        Outer ADMM penalty.
    """

    def __init__(self, dfreq, s, rho):
        if not isinstance(dfreq, DictionaryFreq):
            raise TypeError("dfreq must be a DictionaryFreq")
        s = as_image(s, "signal")
        if s.shape != dfreq.shape:
            raise DimensionError("signal shape %s does not match dictionary transform %s"
                                 % (s.shape, dfreq.shape))
        if not rho > 0:
            raise ParameterError("rho must be positive, got %r" % rho)
        self.dfreq = dfreq
        self.rho = float(rho)
        self.s = s
        self.Sf = dfreq.forward(s)
        # D^H s does not change between iterations
        self.DhS = np.conj(dfreq.Df) * self.Sf[np.newaxis]

    @property
    def shape(self):
        return (self.dfreq.K,) + self.dfreq.shape


def x_update(ws, y, u):
    """Exact minimiser of the x-subproblem for given `y` and scaled multiplier `u`."""
    y = as_coeffs(y, K=ws.dfreq.K, shape=ws.dfreq.shape, name="y")
    u = as_coeffs(u, K=ws.dfreq.K, shape=ws.dfreq.shape, name="u")
    b = ws.DhS + ws.rho * ws.dfreq.forward(y - u)
    xf = solve_bins(ws.dfreq.Df, ws.dfreq.energy, b, ws.rho)
    return ws.dfreq.inverse(xf)
