"""Branch vessel involvement: static (flap in the branch) versus dynamic (FL supply)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from afx.volume_io import LabelSchema, LabelVolume

OSTIUM_MARGIN_MM = 2.0

_SIX = ndimage.generate_binary_structure(3, 1)
_CUBE = ndimage.generate_binary_structure(3, 3)


@dataclass(frozen=True)
class BviRecord:
    branch_name: str
    territory: str | None
    involvement: str        # none | static | dynamic | mixed
    flap_extends: bool
    fl_supplies: bool
    tl_supplies: bool
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "branch": self.branch_name,
            "territory": self.territory,
            "involvement": self.involvement,
            "evidence": {
                "flap_extends_into_branch": self.flap_extends,
                "fl_supplies_branch": self.fl_supplies,
                "tl_supplies_branch": self.tl_supplies,
            },
            "notes": list(self.notes),
        }


def involvement(flap_extends: bool, fl_supplies: bool, tl_supplies: bool) -> str:
    # A flap inside a branch that the FL also feeds counts as mixed, whatever the TL does.
    if flap_extends and fl_supplies:
        return "mixed"
    if flap_extends:
        return "static"
    if fl_supplies:
        return "dynamic"
    return "none"


def _principal_axis(coords: np.ndarray, ostium: np.ndarray) -> np.ndarray:
    centred = coords - coords.mean(axis=0)
    w, vecs = np.linalg.eigh(centred.T @ centred)
    axis = vecs[:, int(np.argmax(w))]
    # point away from the aorta
    if np.dot(coords.mean(axis=0) - ostium, axis) < 0:
        axis = -axis
    return axis


def _box(bits: np.ndarray, margin: int):
    idx = np.nonzero(bits)
    return tuple(slice(max(0, int(i.min()) - margin), int(i.max()) + margin + 1) for i in idx)


def classify_bvi(volume: LabelVolume, schema: LabelSchema, centerline=None,
                 shell: np.ndarray | None = None) -> list[BviRecord]:
    """One record per schema branch, in schema order.

    ``centerline`` is accepted for interface symmetry; the evidence is purely
    local to each branch.
    """
    data = volume.data
    sp = volume.spacing.as_array()
    tl_id, fl_id, flap_id = schema.lumen_labels
    out = []
    for entry in schema.branches:
        full = data == entry.label
        if not full.any():
            out.append(BviRecord(entry.name, entry.territory, "none", False, False, False,
                                 ("not segmented",)))
            continue
        # everything below is local to the branch bounding box (+2 voxels)
        box = _box(full, 2)
        origin = np.array([b.start for b in box]) * sp
        local = data[box]
        branch = full[box]
        lumen = np.isin(local, schema.lumen_labels)
        contact = branch & ndimage.binary_dilation(lumen, structure=_SIX)
        if not contact.any():
            out.append(BviRecord(entry.name, entry.territory, "none", False, False, False,
                                 ("not connected to the aortic lumen",)))
            continue
        ostium = origin + np.argwhere(contact).mean(axis=0) * sp
        fl_sup = bool(np.any(branch & ndimage.binary_dilation(local == fl_id, structure=_SIX)))
        tl_sup = bool(np.any(branch & ndimage.binary_dilation(local == tl_id, structure=_SIX)))
        axis = _principal_axis(origin + np.argwhere(branch) * sp, ostium)
        # flap voxels enclosed by or touching the branch, past the ostium plane
        cand = (local == flap_id) & ndimage.binary_dilation(branch, structure=_CUBE)
        depth = (origin + np.argwhere(cand) * sp - ostium) @ axis
        flap_in = bool(np.any(depth > OSTIUM_MARGIN_MM))
        out.append(BviRecord(entry.name, entry.territory,
                             involvement(flap_in, fl_sup, tl_sup), flap_in, fl_sup, tl_sup))
    return out
