from __future__ import annotations

import numpy as np

from afx.geometry.centerline import SectionFrame

HALF_EXTENT_MM = 40.0
PIXEL_MM = 0.5


def section_offsets(half_extent: float, pixel: float) -> np.ndarray:
    if pixel <= 0 or half_extent <= 0:
        raise ValueError("pixel and half_extent must be positive")
    n = int(round(2.0 * half_extent / pixel))
    return -half_extent + (np.arange(n) + 0.5) * pixel


def sample_cross_sections(volume, origins, us, vs, half_extent: float = HALF_EXTENT_MM,
                          pixel: float = PIXEL_MM) -> np.ndarray:
    """Nearest-neighbour label planes, shape (n_planes, n, n); index [p, i_u, j_v]."""
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    us = np.atleast_2d(np.asarray(us, dtype=float))
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    off = section_offsets(half_extent, pixel)
    n = off.size
    data = volume.data
    shape = np.asarray(data.shape)
    inv = 1.0 / volume.spacing.as_array()
    out = np.zeros((len(origins), n, n), dtype=data.dtype)
    for p in range(len(origins)):
        pts = (origins[p][None, None, :]
               + off[:, None, None] * us[p][None, None, :]
               + off[None, :, None] * vs[p][None, None, :])
        idx = np.floor(pts * inv + 0.5).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < shape), axis=-1)
        plane = out[p]
        ii = idx[inside]
        plane[inside] = data[ii[:, 0], ii[:, 1], ii[:, 2]]
    return out


def sample_cross_section(volume, frame: SectionFrame, half_extent: float = HALF_EXTENT_MM,
                         pixel: float = PIXEL_MM) -> np.ndarray:
    """Labels of the plane through ``frame``; pixels off the volume read as background."""
    return sample_cross_sections(volume, frame.origin, frame.u, frame.v, half_extent, pixel)[0]
