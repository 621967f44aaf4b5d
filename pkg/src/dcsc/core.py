"""Image, dictionary and coefficient-map primitives.

Images are 2-D ``float64`` arrays of shape ``(M, N)`` on the [0, 255]
intensity scale. A set of coefficient maps is a 3-D array of shape
``(K, M, N)``, one map per dictionary filter. All convolutions use a
circular (periodic) boundary, which is what makes the frequency-domain
solvers exact.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import DimensionError, FormatError, ParameterError, ValidationError

__all__ = [
    "Dictionary",
    "DictionaryFreq",
    "as_image",
    "as_coeffs",
    "circular_convolve_sum",
    "circular_correlate",
    "lowpass_split",
    "load_dictionary",
    "save_dictionary",
    "fallback_dictionary",
    "dct_atom_order",
]


DICT_MAGIC = b"CSCD"
DICT_VERSION = 1
_HEADER = struct.Struct("<4sBII")
# Filters with norm up to this much above 1 are left untouched on load so that
# save/load round trips stay bit-exact.
_NORM_SLACK = 1e-10


def as_image(a, name="image"):
    """Validate and convert `a` to a finite 2-D float64 array."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError("%s must be a non-empty 2-D array, got shape %s"
                             % (name, a.shape))
    if not np.all(np.isfinite(a)):
        raise ValidationError("%s contains non-finite values" % name)
    return a


def as_coeffs(x, K=None, shape=None, name="coefficient maps"):
    """Validate a ``(K, M, N)`` stack of coefficient maps."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError("%s must be a 3-D (K, M, N) array, got shape %s"
                             % (name, x.shape))
    if K is not None and x.shape[0] != K:
        raise DimensionError("%s has %d maps, expected %d"
                             % (name, x.shape[0], K))
    if shape is not None and x.shape[1:] != tuple(shape):
        raise DimensionError("%s have spatial shape %s, expected %s"
                             % (name, x.shape[1:], tuple(shape)))
    if not np.all(np.isfinite(x)):
        raise ValidationError("%s contain non-finite values" % name)
    return x


@dataclass(frozen=True)
class Dictionary:
    """A set of ``K`` square ``p x p`` spatial filters.

    Attributes
    ----------
    filters : ndarray
        Array of shape ``(K, p, p)``.
    """

    filters: np.ndarray

    def __post_init__(self):
        d = np.array(self.filters, dtype=np.float64)
        if d.ndim != 3 or d.shape[1] != d.shape[2] or d.shape[0] < 1:
            raise DimensionError("filters must have shape (K, p, p), got %s"
                                 % (d.shape,))
        if not np.all(np.isfinite(d)):
            raise ValidationError("dictionary filters contain non-finite values")
        d.setflags(write=False)
        object.__setattr__(self, "filters", d)

    @property
    def K(self):
        return self.filters.shape[0]

    @property
    def p(self):
        return self.filters.shape[1]

    def normalized(self):
        """Return a copy with every filter projected onto the unit l2 ball."""
        norms = np.sqrt(np.sum(self.filters**2, axis=(1, 2)))
        scale = np.where(norms > 1.0 + _NORM_SLACK, 1.0 / np.maximum(norms, 1e-300), 1.0)
        return Dictionary(self.filters * scale[:, None, None])

    def freq(self, shape):
        """Frequency-domain representation for images of the given shape."""
        return DictionaryFreq(self, shape)


class DictionaryFreq:
    """Zero-padded frequency transforms of a :class:`Dictionary`.

    Only the non-redundant half of the spectrum of a real signal is stored
    (``rfft2`` layout, shape ``(K, M, N // 2 + 1)``); the remaining bins are
    complex conjugates and carry no extra information.

    Attributes
    ----------
    Df : ndarray
        Complex filter transforms, shape ``(K, M, N // 2 + 1)``.
    energy : ndarray
        Real cross-energy ``sum_k |Df_k|**2`` per frequency bin.
    """

    def __init__(self, dictionary, shape):
        M, N = shape
        if dictionary.p > min(M, N):
            raise DimensionError(
                "filter size %d exceeds image size %s" % (dictionary.p, (M, N)))
        self.dictionary = dictionary
        self.shape = (int(M), int(N))
        self.Df = scipy.fft.rfft2(dictionary.filters, s=self.shape, axes=(-2, -1))
        self.energy = np.sum(self.Df.real**2 + self.Df.imag**2, axis=0)

    @property
    def K(self):
        return self.dictionary.K

    def forward(self, x):
        """Transform real maps of shape ``(..., M, N)`` to the rfft2 domain."""
        return scipy.fft.rfft2(x, axes=(-2, -1))

    def inverse(self, xf):
        """Inverse of :meth:`forward`, returning real arrays."""
        return scipy.fft.irfft2(xf, s=self.shape, axes=(-2, -1))

    def synthesize(self, x):
        """Compute ``sum_k d_k * x_k`` for real maps ``x`` of shape (K, M, N)."""
        return self.inverse(np.sum(self.Df * self.forward(x), axis=0))

    def adjoint(self, r):
        """Adjoint of :meth:`synthesize`: circular correlation of `r` with each filter."""
        return self.inverse(np.conj(self.Df) * self.forward(r)[np.newaxis])


def circular_convolve_sum(dictionary, coeffs):
    """Return ``sum_k d_k * x_k`` with periodic boundary.

    Parameters
    ----------
    dictionary : Dictionary or DictionaryFreq
    coeffs : array_like
        Coefficient maps of shape ``(K, M, N)``.

    Returns
    -------
    ndarray
        Image of shape ``(M, N)``.
    """
    if isinstance(dictionary, DictionaryFreq):
        dfreq = dictionary
        coeffs = as_coeffs(coeffs, K=dfreq.K, shape=dfreq.shape)
    else:
        coeffs = as_coeffs(coeffs, K=dictionary.K)
        dfreq = DictionaryFreq(dictionary, coeffs.shape[1:])
    return dfreq.synthesize(coeffs)


def circular_correlate(dictionary, image):
    """Adjoint of :func:`circular_convolve_sum`, shape ``(K, M, N)``."""
    image = as_image(image)
    if isinstance(dictionary, DictionaryFreq):
        dfreq = dictionary
        if image.shape != dfreq.shape:
            raise DimensionError("image shape %s does not match %s"
                                 % (image.shape, dfreq.shape))
    else:
        dfreq = DictionaryFreq(dictionary, image.shape)
    return dfreq.adjoint(image)


def gradient_energy(shape):
    """Frequency response of ``Dx^T Dx + Dy^T Dy`` for circular forward differences."""
    M, N = shape
    wy = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(M) / M)
    wx = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(N // 2 + 1) / N)
    return wy[:, np.newaxis] + wx[np.newaxis, :]


def lowpass_split(image, strength=5.0):
    """Split an image into a smooth component and a detail component.

    The smooth component solves ``(I + strength * (Dx^T Dx + Dy^T Dy)) low =
    image`` with circular boundary, i.e. Tikhonov regularisation of the
    gradient. The detail component is the remainder.

    Returns
    -------
    low, high : ndarray
        ``low + high`` reproduces `image`.
    """
    image = as_image(image)
    if not strength > 0:
        raise ParameterError("lowpass strength must be positive, got %r" % strength)
    G = gradient_energy(image.shape)
    low = scipy.fft.irfft2(scipy.fft.rfft2(image) / (1.0 + strength * G),
                           s=image.shape)
    high = image - low
    return low, high


def save_dictionary(dictionary, path):
    """Write a dictionary in the binary ``CSCD`` format."""
    d = np.ascontiguousarray(dictionary.filters, dtype="<f8")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(DICT_MAGIC, DICT_VERSION, dictionary.K, dictionary.p))
        f.write(d.tobytes())


def load_dictionary(path):
    """Read a dictionary written by :func:`save_dictionary`.

    Filters with l2 norm above 1 are rescaled onto the unit ball.

    Raises
    ------
    FormatError
        On a bad magic number, unsupported version, or payload length
        inconsistent with the ``K`` and ``p`` declared in the header.
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise FormatError("truncated header: %d bytes, need %d"
                          % (len(data), _HEADER.size), offset=len(data))
    magic, version, K, p = _HEADER.unpack_from(data)
    if magic != DICT_MAGIC:
        raise FormatError("bad magic %r, expected %r" % (magic, DICT_MAGIC), offset=0)
    if version != DICT_VERSION:
        raise FormatError("unsupported version %d" % version, offset=4)
    if K < 1 or p < 1:
        raise FormatError("invalid shape K=%d p=%d" % (K, p), offset=5)
    expected = K * p * p * 8
    payload = len(data) - _HEADER.size
    if payload != expected:
        raise FormatError(
            "payload holds %d bytes but K=%d, p=%d requires %d"
            % (payload, K, p, expected), offset=_HEADER.size + min(payload, expected))
    filters = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(K, p, p)
    if not np.all(np.isfinite(filters)):
        bad = int(np.flatnonzero(~np.isfinite(filters.ravel()))[0])
        raise FormatError("non-finite filter coefficient", offset=_HEADER.size + 8 * bad)
    return Dictionary(filters.astype(np.float64)).normalized()


def dct_atom_order(p):
    """Frequency pairs ``(u, v)`` of the non-DC 2-D DCT-II atoms, low frequencies first."""
    pairs = [(u, v) for u in range(p) for v in range(p) if (u, v) != (0, 0)]
    return sorted(pairs, key=lambda uv: (uv[0] + uv[1], uv[0]))


def fallback_dictionary(K, p, seed=0):
    """Deterministic stand-in dictionary for when no trained one is available.

    The first ``min(K, p*p - 1)`` filters are orthonormal 2-D DCT-II atoms
    excluding the constant (DC) atom, ordered by increasing total frequency.
    Any remaining filters are zero-mean Gaussian random filters drawn from
    ``numpy.random.default_rng(seed)``. Every filter has unit l2 norm.
    """
    if int(K) != K or K < 1:
        raise ParameterError("K must be a positive integer, got %r" % K)
    if int(p) != p or p < 2:
        raise ParameterError("p must be an integer >= 2, got %r" % p)
    K, p = int(K), int(p)
    basis = scipy.fft.dct(np.eye(p), type=2, norm="ortho", axis=0)
    filters = []
    for u, v in dct_atom_order(p)[:K]:
        filters.append(np.outer(basis[u], basis[v]))
    rng = np.random.default_rng(seed)
    while len(filters) < K:
        g = rng.standard_normal((p, p))
        g -= g.mean()
        filters.append(g)
    filters = np.array(filters)
    filters /= np.sqrt(np.sum(filters**2, axis=(1, 2)))[:, None, None]
    return Dictionary(filters)
