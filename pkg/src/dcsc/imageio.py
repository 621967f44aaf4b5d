"""8-bit grayscale PNG / PGM reading and writing."""

import logging
import os

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

__all__ = ["read_image", "write_image", "to_gray", "center_crop", "IMAGE_SUFFIXES"]

IMAGE_SUFFIXES = (".png", ".pgm")

# Rec.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def to_gray(rgb):
    """Rec.601 luma of an ``(M, N, 3)`` array, kept in floating point."""
    return np.asarray(rgb, dtype=np.float64)[..., :3] @ _LUMA


def read_image(path):
    """Read an 8-bit image as a float64 array on the [0, 255] scale.

    Colour images are converted with the Rec.601 luma weights.
    """
    with Image.open(path) as im:
        if im.mode in ("L", "LA"):
            return np.asarray(im.convert("L"), dtype=np.float64)
        if im.mode in ("I;16", "I;16B", "I"):
            raise ValueError("%s: only 8-bit images are supported (mode %s)"
                             % (path, im.mode))
        return to_gray(np.asarray(im.convert("RGB")))


def write_image(image, path):
    """Write `image` (values on [0, 255]) as 8-bit PNG or binary PGM by suffix."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext not in IMAGE_SUFFIXES:
        raise ValueError("unsupported image suffix %r, use .png or .pgm" % ext)
    a = np.clip(np.rint(np.asarray(image, dtype=np.float64)), 0, 255).astype(np.uint8)
    Image.fromarray(a).save(path, format="PNG" if ext == ".png" else "PPM")


def center_crop(image, max_size):
    """Center-crop `image` so neither side exceeds `max_size`; warns when cropping."""
    M, N = image.shape
    m, n = min(M, max_size), min(N, max_size)
    if (m, n) == (M, N):
        return image
    log.warning("cropping %dx%d image to %dx%d (use --full-size to disable)", M, N, m, n)
    r0, c0 = (M - m) // 2, (N - n) // 2
    return image[r0:r0 + m, c0:c0 + n]
