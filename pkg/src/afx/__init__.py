"""Quantitative feature extraction from aortic dissection label maps."""

__version__ = "0.1.0"

from afx.volume_io import (  # noqa: E402
    LabelSchema,
    LabelVolume,
    SchemaEntry,
    VoxelSpacing,
    load_schema,
    load_volume,
    save_schema,
    save_volume,
)

__all__ = [
    "LabelSchema",
    "LabelVolume",
    "SchemaEntry",
    "VoxelSpacing",
    "load_schema",
    "load_volume",
    "save_schema",
    "save_volume",
]
