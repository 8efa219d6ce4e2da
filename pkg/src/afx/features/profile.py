"""True-lumen collapse and false-lumen area ratio along the centerline."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from afx.errors import AnalysisError
from afx.geometry.centerline import Centerline, SectionFrame
from afx.geometry.sections import HALF_EXTENT_MM, PIXEL_MM, sample_cross_sections
from afx.volume_io import LabelSchema, LabelVolume

TLC_WARN_PCT = 10.0
FLAR_RISK_PCT = 60.0

_EIGHT = np.ones((3, 3), dtype=bool)
_CUBE = np.ones((3, 3, 3), dtype=bool)


@dataclass(frozen=True)
class CrossSectionRecord:
    arclength: float
    a_tl: float
    a_fl: float
    a_flap: float

    @property
    def a_total(self) -> float:
        return self.a_tl + self.a_fl + self.a_flap

    @property
    def tlc_pct(self) -> float:
        t = self.a_total
        return 100.0 * self.a_tl / t if t > 0 else 0.0

    @property
    def flar_pct(self) -> float:
        t = self.a_total
        return 100.0 * self.a_fl / t if t > 0 else 0.0


def _central_component(lumen: np.ndarray) -> np.ndarray:
    """In-plane connected lumen region nearest the plane origin."""
    labels, n = ndimage.label(lumen, structure=_EIGHT)
    if n <= 1:
        return labels > 0
    size = lumen.shape[0]
    c = 0.5 * (size - 1)
    ii, jj = np.nonzero(labels)
    d2 = (ii - c) ** 2 + (jj - c) ** 2
    ids = labels[ii, jj]
    best = np.full(n + 1, np.inf)
    np.minimum.at(best, ids, d2)
    return labels == int(np.argmin(best))


def _section_areas(planes, tl, fl, flap, pixel_area):
    out = []
    for plane in planes:
        keep = _central_component((plane == tl) | (plane == fl) | (plane == flap))
        out.append((
            np.count_nonzero(keep & (plane == tl)) * pixel_area,
            np.count_nonzero(keep & (plane == fl)) * pixel_area,
            np.count_nonzero(keep & (plane == flap)) * pixel_area,
        ))
    return out


def aortic_section_labels(volume: LabelVolume, schema: LabelSchema) -> LabelVolume:
    """Copy of ``volume`` with flap voxels touching a branch voxel cleared.

    Flap that has prolapsed into a branch lies outside the aortic cross-section
    but would otherwise join it in-plane wherever the section cuts the ostium.
    """
    ids = [e.label for e in schema.branches]
    data = volume.data
    if not ids:
        return volume
    branch = np.isin(data, ids)
    if not branch.any():
        return volume
    drop = (data == schema.flap) & ndimage.binary_dilation(branch, structure=_CUBE)
    if not drop.any():
        return volume
    out = data.copy()
    out[drop] = 0
    return volume.with_data(out)


def luminal_profile(volume: LabelVolume, schema: LabelSchema, centerline: Centerline, *,
                    half_extent: float = HALF_EXTENT_MM, pixel: float = PIXEL_MM,
                    workers: int = 1, chunk: int = 32) -> list[CrossSectionRecord]:
    """One record per centerline point, ordered by arclength."""
    tl, fl, flap = schema.lumen_labels
    if not np.any(volume.data == tl):
        raise AnalysisError("no true lumen segmented")
    volume = aortic_section_labels(volume, schema)
    frames = [SectionFrame.from_normal(p, t)
              for p, t in zip(centerline.points, centerline.tangents)]
    origins = np.array([f.origin for f in frames])
    us = np.array([f.u for f in frames])
    vs = np.array([f.v for f in frames])
    pixel_area = pixel * pixel

    def work(lo):
        hi = min(lo + chunk, len(frames))
        planes = sample_cross_sections(volume, origins[lo:hi], us[lo:hi], vs[lo:hi],
                                       half_extent, pixel)
        return _section_areas(planes, tl, fl, flap, pixel_area)

    starts = range(0, len(frames), chunk)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, starts))   # map keeps arclength order
    else:
        parts = [work(lo) for lo in starts]
    areas = [a for part in parts for a in part]
    return [CrossSectionRecord(float(s), *a) for s, a in zip(centerline.arclength, areas)]


def min_tlc(profile, warn_pct: float = TLC_WARN_PCT):
    """``(tlc_pct, arclength, warning)`` of the most collapsed section."""
    valid = [r for r in profile if r.a_total > 0]
    if not valid:
        raise AnalysisError("no cross-section intersects the lumen")
    best = min(valid, key=lambda r: r.tlc_pct)    # first minimum wins
    return best.tlc_pct, best.arclength, best.tlc_pct < warn_pct


def max_flar(profile, descending_start: float, risk_pct: float = FLAR_RISK_PCT):
    """``(flar_pct, arclength, risk_flag)`` over sections at or beyond ``descending_start``."""
    valid = [r for r in profile if r.arclength >= descending_start and r.a_total > 0]
    if not valid:
        raise AnalysisError(f"no cross-sections beyond descending start {descending_start:.1f} mm")
    best = max(valid, key=lambda r: r.flar_pct)
    return best.flar_pct, best.arclength, best.flar_pct > risk_pct


def flagged_intervals(profile, warn_pct: float = TLC_WARN_PCT) -> list[tuple[float, float]]:
    """Maximal runs of consecutive sections with TLC below ``warn_pct``."""
    runs = []
    start = prev = None
    for r in profile:
        low = r.a_total > 0 and r.tlc_pct < warn_pct
        if low and start is None:
            start = r.arclength
        if not low and start is not None:
            runs.append((start, prev))
            start = None
        prev = r.arclength
    if start is not None:
        runs.append((start, prev))
    return runs
