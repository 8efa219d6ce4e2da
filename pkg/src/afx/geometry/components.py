from __future__ import annotations

import numpy as np
from scipy import ndimage

from afx.geometry.mask import VoxelMask

_STRUCTURES = {
    6: ndimage.generate_binary_structure(3, 1),
    18: ndimage.generate_binary_structure(3, 2),
    26: ndimage.generate_binary_structure(3, 3),
}


def structure(connectivity: int) -> np.ndarray:
    try:
        return _STRUCTURES[connectivity]
    except KeyError:
        raise ValueError(f"connectivity must be 6, 18 or 26, got {connectivity}") from None


def label_components(bits: np.ndarray, connectivity: int = 26) -> tuple[np.ndarray, int]:
    """Label array whose ids are ordered by size (descending) then first voxel index.

    Id 1 is the largest component; 0 is background.
    """
    labels, n = ndimage.label(bits, structure=structure(connectivity))
    if n == 0:
        return labels, 0
    flat = labels.ravel()
    sizes = np.bincount(flat, minlength=n + 1)[1:]
    fg = np.flatnonzero(flat)
    first = np.full(n, flat.size, dtype=np.int64)
    np.minimum.at(first, flat[fg] - 1, fg)
    order = np.lexsort((first, -sizes))
    remap = np.zeros(n + 1, dtype=labels.dtype)
    remap[order + 1] = np.arange(1, n + 1, dtype=labels.dtype)
    return remap[labels], n


def connected_components(mask: VoxelMask, connectivity: int = 26) -> list[VoxelMask]:
    """Split ``mask`` into components, largest first (ties: lowest first voxel index)."""
    labels, n = label_components(mask.bits, connectivity)
    return [VoxelMask(labels == i, mask.spacing) for i in range(1, n + 1)]


def largest_component(bits: np.ndarray, connectivity: int = 26) -> np.ndarray:
    labels, n = label_components(bits, connectivity)
    if n == 0:
        return np.zeros_like(bits, dtype=bool)
    return labels == 1
