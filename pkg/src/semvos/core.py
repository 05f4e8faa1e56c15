"""Raster types and mask algorithms shared by every stage.

Rasters are plain numpy arrays indexed ``[row, col]``:

* binary masks are 2-D ``bool`` arrays,
* gray maps and weight maps are 2-D ``float64`` arrays,
* score maps wrap a gray map together with its scale (logit or probability).
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels


class Scale(enum.Enum):
    LOGIT = "logit"
    PROBABILITY = "probability"


class Connectivity(enum.Enum):
    FOUR = 4
    EIGHT = 8


class DimensionError(ValueError):
    """Two rasters that must share a shape do not."""


def as_mask(m):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"mask must be a non-empty 2-D array, got shape {m.shape}")
    return m.astype(bool, copy=False)


def as_graymap(g):
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 1 or g.shape[1] < 1:
        raise ValueError(f"gray map must be a non-empty 2-D array, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("gray map contains non-finite values")
    return g


def as_weightmap(w):
    w = as_graymap(w)
    if w.min() < 0.0 or w.max() > 1.0:
        raise ValueError("weight map values must lie in [0, 1]")
    return w


def check_same_shape(*arrays, what="rasters"):
    shapes = {a.shape[:2] for a in arrays}
    if len(shapes) > 1:
        raise DimensionError(f"{what} have mismatched dimensions: {sorted(shapes)}")


@dataclass(frozen=True)
class ScoreMap:
    """Per-pixel foreground evidence tagged with its scale."""

    values: np.ndarray
    scale: Scale = Scale.PROBABILITY

    def __post_init__(self):
        values = as_graymap(self.values)
        if self.scale is Scale.PROBABILITY and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("probability score map values must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape


def mask_iou(a, b):
    """Intersection over union; two empty masks score 1.0."""
    a, b = as_mask(a), as_mask(b)
    check_same_shape(a, b, what="masks")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def label_components(m, connectivity=Connectivity.EIGHT):
    """Return ``(labels, n)``: -1 on background, components numbered
    0..n-1 in row-major order of their first pixel."""
    m = as_mask(m)
    eight = Connectivity(connectivity) is Connectivity.EIGHT
    return kernels.label_components(np.ascontiguousarray(m, dtype=np.uint8), eight)


def connected_components(m, connectivity=Connectivity.EIGHT):
    labels, n = label_components(m, connectivity)
    return [labels == k for k in range(n)]


def boundary_pixels(m):
    """Foreground pixels with a 4-neighbour that is background or off-frame."""
    m = as_mask(m)
    padded = np.pad(m, 1, mode="constant", constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return m & ~interior


def gaussian_kernel(sigma):
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _convolve_axis(g, kernel, axis):
    radius = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(g, pad, mode="edge")
    n = g.shape[axis]
    out = np.zeros_like(g)
    for i, weight in enumerate(kernel):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(i, i + n)
        out += weight * padded[tuple(sl)]
    return out


def gaussian_smooth(g, sigma):
    """Separable Gaussian blur, kernel truncated at ceil(3 sigma), clamp-to-edge.

    The result is clipped to the input's value range, so a map in [0, 1]
    stays in [0, 1] and a constant map is returned unchanged.
    """
    g = as_graymap(g)
    kernel = gaussian_kernel(sigma)
    out = _convolve_axis(_convolve_axis(g, kernel, 1), kernel, 0)
    return np.clip(out, g.min(), g.max())
