"""Intimal tears as places where the true and false lumen touch directly."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from afx.geometry.centerline import Centerline
from afx.geometry.components import label_components
from afx.features.zones import ZoneMap, classify_zone
from afx.volume_io import LabelSchema, LabelVolume

MIN_TEAR_AREA_MM2 = 10.0
SIGNIFICANCE_RATIO = 0.5


@dataclass(frozen=True)
class TearCandidate:
    contact_voxels: int     # TL and FL voxels taking part in the contact
    contact_faces: int
    contact_area: float     # mm²
    centroid: tuple[float, float, float]
    arclength: float
    zone: int | None

    def to_dict(self) -> dict:
        return {
            "arclength_mm": self.arclength,
            "zone": self.zone,
            "contact_area_mm2": self.contact_area,
            "contact_faces": self.contact_faces,
            "contact_voxels": self.contact_voxels,
            "centroid_mm": list(self.centroid),
        }


def contact_faces(tl: np.ndarray, fl: np.ndarray):
    """TL/FL 6-adjacent voxel pairs per axis: list of (axis, low-side voxel indices)."""
    out = []
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        touch = (tl[lo] & fl[hi]) | (fl[lo] & tl[hi])
        out.append((axis, np.argwhere(touch)))
    return out


def detect_tears(volume: LabelVolume, schema: LabelSchema, centerline: Centerline,
                 min_area: float = MIN_TEAR_AREA_MM2,
                 zones: ZoneMap | None = None) -> list[TearCandidate]:
    """Clusters of TL-FL contact faces with area >= ``min_area``, sorted by arclength."""
    tl = volume.data == schema.true_lumen
    fl = volume.data == schema.false_lumen
    sp = volume.spacing.as_array()
    face_area = np.array([sp[1] * sp[2], sp[0] * sp[2], sp[0] * sp[1]])
    faces = contact_faces(tl, fl)
    involved = np.zeros(tl.shape, dtype=bool)
    for axis, low in faces:
        if len(low):
            high = low.copy()
            high[:, axis] += 1
            involved[tuple(low.T)] = True
            involved[tuple(high.T)] = True
    if not involved.any():
        return []
    labels, n = label_components(involved, 26)
    count = np.zeros(n + 1, dtype=np.int64)
    area = np.zeros(n + 1)
    moment = np.zeros((n + 1, 3))
    for axis, low in faces:
        if not len(low):
            continue
        ids = labels[tuple(low.T)]
        mid = low * sp
        mid[:, axis] += 0.5 * sp[axis]
        np.add.at(count, ids, 1)
        np.add.at(area, ids, face_area[axis])
        np.add.at(moment, ids, mid * face_area[axis])
    nvox = np.bincount(labels.ravel(), minlength=n + 1)
    keep = [i for i in range(1, n + 1) if area[i] >= min_area]
    if not keep:
        return []
    centroids = moment[keep] / area[keep][:, None]
    arcs = centerline.project_many(centroids)
    out = []
    for i, c, s in zip(keep, centroids, arcs):
        out.append(TearCandidate(
            contact_voxels=int(nvox[i]),
            contact_faces=int(count[i]),
            contact_area=float(area[i]),
            centroid=tuple(float(x) for x in c),
            arclength=float(s),
            zone=None if zones is None else classify_zone(float(s), zones),
        ))
    out.sort(key=lambda t: (t.arclength, t.centroid))
    return out


def primary_entry_tear(tears, min_area: float = 0.0) -> TearCandidate | None:
    """Most proximal tear whose area is at least half the largest; None if there are none."""
    tears = [t for t in tears if t.contact_area >= min_area]
    if not tears:
        return None
    cutoff = SIGNIFICANCE_RATIO * max(t.contact_area for t in tears)
    return min((t for t in tears if t.contact_area >= cutoff), key=lambda t: t.arclength)
