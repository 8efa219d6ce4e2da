"""Voxel geometry primitives used by the feature and metric modules."""
from afx.geometry.mask import VoxelMask
from afx.geometry.components import connected_components, label_components
from afx.geometry.distance import distance_transform, surface_voxels
from afx.geometry.centerline import (
    Centerline,
    SectionFrame,
    extract_centerline,
    geodesic_distances,
)
from afx.geometry.sections import sample_cross_section, sample_cross_sections

__all__ = [
    "Centerline",
    "SectionFrame",
    "VoxelMask",
    "connected_components",
    "distance_transform",
    "extract_centerline",
    "geodesic_distances",
    "label_components",
    "sample_cross_section",
    "sample_cross_sections",
    "surface_voxels",
]
