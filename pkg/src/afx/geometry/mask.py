from __future__ import annotations

import numpy as np

from afx.volume_io import VoxelSpacing


class VoxelMask:
    """Boolean occupancy grid with the spacing of the volume it came from."""

    __slots__ = ("bits", "spacing")

    def __init__(self, bits, spacing):
        bits = np.asarray(bits, dtype=bool)
        if bits.ndim != 3:
            raise ValueError(f"mask must be 3D, got shape {bits.shape}")
        if not isinstance(spacing, VoxelSpacing):
            spacing = VoxelSpacing(*spacing)
        self.bits = bits
        self.spacing = spacing

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.bits.shape)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __len__(self):
        return self.count

    def __bool__(self):
        return bool(self.bits.any())

    def same_grid(self, other: "VoxelMask") -> bool:
        return self.bits.shape == other.bits.shape and self.spacing == other.spacing

    def coords_mm(self) -> np.ndarray:
        """Physical centres of the foreground voxels, shape (n, 3)."""
        return np.argwhere(self.bits) * self.spacing.as_array()

    def __repr__(self):
        return f"VoxelMask(dims={self.dims}, count={self.count})"
