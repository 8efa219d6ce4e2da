"""Twelve-zone aortic map anchored at branch ostia.

A branch whose schema entry carries ``zone=k`` anchors the distal end of
zone ``k`` at its ostium arclength.  Boundaries between anchors are spaced
uniformly; zones proximal to the first anchor split the root segment evenly;
zones beyond the last anchor follow ``DEFAULT_ZONE_LENGTHS_MM``, shrunk
proportionally when they would overrun the centerline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from afx.errors import ZoneError
from afx.geometry.centerline import Centerline
from afx.volume_io import LabelSchema, LabelVolume

N_ZONES = 12
DEFAULT_ZONE_LENGTHS_MM = (30, 20, 20, 20, 80, 80, 20, 20, 20, 80, 50, 70)

_SIX = ndimage.generate_binary_structure(3, 1)


@dataclass(frozen=True)
class ZoneMap:
    boundaries: tuple[float, ...]

    def __post_init__(self):
        b = self.boundaries
        if len(b) != N_ZONES:
            raise ZoneError(f"expected {N_ZONES} zone boundaries, got {len(b)}")
        if any(x >= y for x, y in zip(b[:-1], b[1:])):
            raise ZoneError("zone boundaries must be strictly increasing")


def classify_zone(arclength: float, zones: ZoneMap) -> int:
    """Smallest zone whose distal boundary is at or beyond ``arclength``."""
    for i, b in enumerate(zones.boundaries):
        if arclength <= b:
            return i
    return N_ZONES - 1


def zone_map_from_anchors(anchors: dict[int, float], total_length: float) -> ZoneMap:
    if len(anchors) < 2:
        raise ZoneError(f"need at least 2 zone anchors, found {len(anchors)}")
    zs = sorted(anchors)
    s = np.array([anchors[z] for z in zs])
    if np.any(np.diff(s) <= 0):
        raise ZoneError("branch ostia are out of zone order along the centerline")
    b = np.zeros(N_ZONES)
    b[: zs[0] + 1] = s[0] * np.arange(1, zs[0] + 2) / (zs[0] + 1)
    for (z0, s0), (z1, s1) in zip(zip(zs, s), zip(zs[1:], s[1:])):
        b[z0 : z1 + 1] = np.linspace(s0, s1, z1 - z0 + 1)
    last = zs[-1]
    if last < N_ZONES - 1:
        tail = np.asarray(DEFAULT_ZONE_LENGTHS_MM[last + 1 :], dtype=float)
        room = total_length - s[-1]
        if room <= 0:
            raise ZoneError("no centerline left beyond the most distal anchor")
        tail *= min(1.0, room / tail.sum())
        b[last + 1 :] = s[-1] + np.cumsum(tail)
    return ZoneMap(tuple(float(x) for x in b))


def lumen_shell(lumen: np.ndarray) -> np.ndarray:
    """Voxels that are lumen or 6-adjacent to it."""
    return ndimage.binary_dilation(lumen, structure=_SIX)


def branch_ostium(branch: np.ndarray, shell: np.ndarray, spacing) -> np.ndarray | None:
    """Centroid (mm) of the branch voxels touching the aortic lumen, or None."""
    contact = branch & shell
    if not contact.any():
        return None
    return np.argwhere(contact).mean(axis=0) * spacing.as_array()


def ostium_arclengths(volume: LabelVolume, schema: LabelSchema, centerline: Centerline,
                      shell: np.ndarray | None = None) -> dict[str, float]:
    if shell is None:
        shell = lumen_shell(np.isin(volume.data, schema.lumen_labels))
    out = {}
    for entry in schema.branches:
        p = branch_ostium(volume.data == entry.label, shell, volume.spacing)
        if p is not None:
            out[entry.name] = centerline.project(p)
    return out


def build_zone_map(volume: LabelVolume, schema: LabelSchema, centerline: Centerline,
                   ostia: dict[str, float] | None = None) -> ZoneMap:
    if ostia is None:
        ostia = ostium_arclengths(volume, schema, centerline)
    anchors: dict[int, float] = {}
    for entry in schema.branches:
        if entry.zone is None or entry.name not in ostia:
            continue
        anchors[entry.zone] = max(anchors.get(entry.zone, -np.inf), ostia[entry.name])
    return zone_map_from_anchors(anchors, centerline.length)
