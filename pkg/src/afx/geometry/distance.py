"""Exact Euclidean distance transforms on anisotropic grids.

Distances are measured between voxel centres.  The grid exterior counts as
background, so a voxel on the volume border is one spacing away from
background along that axis.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from afx.geometry.mask import VoxelMask


def center_distance(delta: np.ndarray, spacing) -> np.ndarray:
    """Physical length of integer index offsets ``delta`` (shape (3, ...))."""
    dx, dy, dz = spacing
    a = delta[0] * dx
    b = delta[1] * dy
    c = delta[2] * dz
    return np.sqrt((a * a + b * b) + c * c)


def nearest_feature_offsets(features: np.ndarray, spacing) -> np.ndarray:
    """Index offset from every voxel to its nearest ``True`` voxel in ``features``."""
    inds = ndimage.distance_transform_edt(
        ~features, sampling=tuple(spacing), return_distances=False, return_indices=True
    )
    grid = np.indices(features.shape)
    return inds - grid


def distance_transform(mask: VoxelMask) -> np.ndarray:
    """Distance (mm) from each foreground voxel centre to the nearest background centre."""
    full = mask.bits
    out = np.zeros(full.shape, dtype=np.float64)
    if not full.any():
        return out
    # Work on the foreground bounding box; the one-voxel pad supplies the
    # background beyond it (or beyond the grid edge), so results are unchanged.
    box = tuple(slice(int(i.min()), int(i.max()) + 1) for i in np.nonzero(full))
    bits = full[box]
    padded = np.pad(bits, 1, constant_values=False)
    offsets = nearest_feature_offsets(~padded, mask.spacing)
    inner = tuple(slice(1, -1) for _ in range(3))
    delta = offsets[(slice(None),) + inner]
    dist = center_distance(delta, mask.spacing)
    sub = out[box]
    sub[bits] = dist[bits]
    return out


_SIX = ndimage.generate_binary_structure(3, 1)


def surface_voxels(mask: VoxelMask) -> VoxelMask:
    """Foreground voxels with at least one 6-neighbour in the background (or off-grid)."""
    bits = mask.bits
    interior = ndimage.binary_erosion(bits, structure=_SIX, border_value=0)
    return VoxelMask(bits & ~interior, mask.spacing)
