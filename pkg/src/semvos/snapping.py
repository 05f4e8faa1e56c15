"""Boundary snapping against an external contour-strength map.

Regions come from thresholding the contour map once (weak pixels form
regions, strong pixels are absorbed by the nearest region), the mask is
snapped to regions by majority vote, and thin components lost in the vote
are put back when their outline follows detected contours.
"""
import numpy as np

from . import kernels
from .core import (
    Connectivity,
    as_graymap,
    as_mask,
    boundary_pixels,
    check_same_shape,
    label_components,
)

DEFAULT_TAU = 0.2
DEFAULT_DIST = 2
DEFAULT_RHO = 0.75
DEFAULT_VOTE = 0.5


def _check_contours(c):
    c = as_graymap(c)
    if c.min() < 0.0 or c.max() > 1.0:
        raise ValueError("contour strengths must lie in [0, 1]")
    return c


def superpixels_from_contours(c, tau=DEFAULT_TAU):
    """Label every pixel with a region id (int32, ids 0..n-1)."""
    c = _check_contours(c)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    seeds, _ = label_components(c < tau, Connectivity.FOUR)
    return kernels.absorb_unlabeled(np.ascontiguousarray(seeds, dtype=np.int32))


def snap_to_superpixels(m, sp, vote=DEFAULT_VOTE):
    """Union of the regions whose overlap with ``m`` exceeds ``vote``."""
    m = as_mask(m)
    sp = np.asarray(sp)
    check_same_shape(m, sp, what="mask and superpixels")
    if not 0.0 < vote < 1.0:
        raise ValueError(f"vote must lie in (0, 1), got {vote}")
    n = int(sp.max()) + 1
    sizes = np.bincount(sp.ravel(), minlength=n)
    hits = np.bincount(sp.ravel(), weights=m.ravel(), minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        keep = hits / sizes > vote
    return keep[sp]


def recover_thin_structures(
    snapped, original, c, tau=DEFAULT_TAU, dist=DEFAULT_DIST, rho=DEFAULT_RHO,
    connectivity=Connectivity.EIGHT,
):
    """Add back components of ``original`` untouched by ``snapped`` whose
    boundary lies mostly (fraction >= ``rho``) within Chebyshev distance
    ``dist`` of a contour pixel (strength >= ``tau``)."""
    snapped, original = as_mask(snapped), as_mask(original)
    c = _check_contours(c)
    check_same_shape(snapped, original, c, what="masks and contour map")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if dist < 0:
        raise ValueError("dist must be non-negative")

    strong = np.ascontiguousarray(c >= tau, dtype=np.uint8)
    result = snapped.copy()
    labels, n = label_components(original, connectivity)
    for k in range(n):
        comp = labels == k
        if (comp & snapped).any():
            continue
        edge = boundary_pixels(comp)
        near = kernels.near_mask(
            np.ascontiguousarray(edge, dtype=np.uint8), strong, float(dist), True
        )
        if np.count_nonzero(near) / np.count_nonzero(edge) >= rho:
            result |= comp
    return result


def snap_frame(mask, c, tau=DEFAULT_TAU, dist=DEFAULT_DIST, rho=DEFAULT_RHO, vote=DEFAULT_VOTE):
    """Superpixel snapping followed by thin-structure recovery."""
    sp = superpixels_from_contours(c, tau)
    snapped = snap_to_superpixels(mask, sp, vote)
    return recover_thin_structures(snapped, mask, c, tau, dist, rho)
