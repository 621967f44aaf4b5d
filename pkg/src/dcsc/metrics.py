"""Noise synthesis and fidelity metrics on the [0, 255] intensity scale."""

import math
from dataclasses import dataclass

import numpy as np

from .core import as_image
from .errors import DimensionError, ParameterError

__all__ = ["NoiseSpec", "add_gaussian_noise", "noise_field", "mse", "psnr",
           "format_db", "PEAK"]

PEAK = 255.0


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise of standard deviation `sigma`.

    The noise stream is drawn from a Philox4x64-10 counter-based generator
    keyed by `seed` (``numpy.random.Philox``) and converted to normals by
    ``Generator.standard_normal``. The field for an ``M x N`` image is the
    first ``M * N`` variates in row-major order, so it depends only on the
    image shape and the seed.
    """

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ParameterError("sigma must be nonnegative, got %r" % self.sigma)
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be an unsigned 64-bit integer, got %r"
                                 % self.seed)


def noise_field(shape, spec):
    """Unclamped noise samples ``sigma * n`` for an image of the given shape."""
    rng = np.random.Generator(np.random.Philox(int(spec.seed)))
    return spec.sigma * rng.standard_normal(shape)


def add_gaussian_noise(image, spec):
    """Return ``clip(image + noise, 0, 255)``."""
    image = as_image(image)
    if spec.sigma == 0:
        return image.copy()
    return np.clip(image + noise_field(image.shape, spec), 0.0, PEAK)


def mse(a, b):
    """Mean squared difference of two equally shaped images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError("image shapes differ: %s vs %s" % (a.shape, b.shape))
    d = a - b
    return float(np.mean(d * d))


def psnr(a, b, peak=PEAK):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    m = mse(a, b)
    if m == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / m)


def format_db(value):
    """Fixed 4-decimal rendering used in CSV output, ``inf`` for the sentinel."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return "%.4f" % value
