"""Per-class segmentation metrics (Dice, HD95) and their cross-case aggregate.

Conventions:
  * Dice of two empty masks is 1.0; empty against non-empty is 0.0.
  * HD95 is undefined (``None``) when either mask is empty.  Otherwise it is
    the 95th percentile, with linear interpolation, of the pooled directed
    distances from every surface voxel of each mask to the nearest surface
    voxel of the other.  Distances are between voxel centres.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from afx.errors import InputError
from afx.geometry.distance import center_distance, nearest_feature_offsets, surface_voxels
from afx.geometry.mask import VoxelMask
from afx.volume_io import LabelSchema, LabelVolume

DEFAULT_CLASSES = ("true-lumen", "false-lumen", "intimal-flap")
HD_PERCENTILE = 95.0


def _check_grid(pred: VoxelMask, ref: VoxelMask) -> None:
    if not pred.same_grid(ref):
        raise InputError(f"mask grids differ: {pred.dims} @ {tuple(pred.spacing)} "
                         f"vs {ref.dims} @ {tuple(ref.spacing)}")


def dice(pred: VoxelMask, ref: VoxelMask) -> float:
    _check_grid(pred, ref)
    a, b = pred.count, ref.count
    if a + b == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(pred.bits & ref.bits)) / (a + b)


def directed_surface_distances(src: VoxelMask, dst: VoxelMask) -> np.ndarray:
    """Distance (mm) from each surface voxel of ``src`` to the surface of ``dst``.

    Order follows ``np.nonzero`` over the source surface.
    """
    s = surface_voxels(src).bits
    d = surface_voxels(dst).bits
    offsets = nearest_feature_offsets(d, src.spacing)
    return center_distance(offsets[:, s], src.spacing)


def surface_distances(pred: VoxelMask, ref: VoxelMask) -> np.ndarray:
    """Pooled directed distances in both directions (pred→ref first)."""
    _check_grid(pred, ref)
    if not pred or not ref:
        raise InputError("surface distances need two non-empty masks")
    return np.concatenate([directed_surface_distances(pred, ref),
                           directed_surface_distances(ref, pred)])


def hd95(pred: VoxelMask, ref: VoxelMask, percentile: float = HD_PERCENTILE) -> float | None:
    _check_grid(pred, ref)
    if not pred or not ref:
        return None
    return float(np.percentile(surface_distances(pred, ref), percentile))


def hausdorff(pred: VoxelMask, ref: VoxelMask) -> float | None:
    return hd95(pred, ref, 100.0)


@dataclass(frozen=True)
class MetricRow:
    class_name: str
    dsc: float
    hd95: float | None      # None: undefined, a class is empty on one side

    def to_dict(self) -> dict:
        return {"class": self.class_name, "dsc": self.dsc, "hd95": self.hd95}


def evaluate_case(pred: LabelVolume, ref: LabelVolume, schema: LabelSchema,
                  classes=DEFAULT_CLASSES) -> list[MetricRow]:
    if pred.dims != ref.dims or pred.spacing != ref.spacing:
        raise InputError(f"geometry mismatch: {pred.dims} vs {ref.dims}")
    rows = []
    for role in classes:
        label = schema.label_of(role)     # SchemaError if the role is absent
        p = VoxelMask(pred.data == label, pred.spacing)
        r = VoxelMask(ref.data == label, ref.spacing)
        rows.append(MetricRow(role, dice(p, r), hd95(p, r)))
    return rows


@dataclass(frozen=True)
class AggregateRow:
    class_name: str
    n_cases: int
    dsc_mean: float
    dsc_std: float
    hd95_mean: float | None
    hd95_std: float | None
    hd95_n: int
    hd95_undefined: int

    def to_dict(self) -> dict:
        return {
            "class": self.class_name,
            "n_cases": self.n_cases,
            "dsc": {"mean": self.dsc_mean, "std": self.dsc_std},
            "hd95": {"mean": self.hd95_mean, "std": self.hd95_std,
                     "n": self.hd95_n, "undefined": self.hd95_undefined},
        }


def _mean_std(xs):
    if not xs:
        return None, None
    a = np.asarray(xs, dtype=float)
    return float(a.mean()), float(a.std())     # population std


def aggregate(cases) -> list[AggregateRow]:
    """Per-class mean and population std over cases, in first-seen class order.

    Undefined HD95 entries are left out of the statistics and counted.
    """
    cases = list(cases)
    if not cases:
        raise ValueError("aggregate needs at least one case")
    order, dsc, hd = [], {}, {}
    for rows in cases:
        for row in rows:
            if row.class_name not in dsc:
                order.append(row.class_name)
                dsc[row.class_name], hd[row.class_name] = [], []
            dsc[row.class_name].append(row.dsc)
            hd[row.class_name].append(row.hd95)
    out = []
    for name in order:
        defined = [h for h in hd[name] if h is not None]
        dm, ds = _mean_std(dsc[name])
        hm, hs = _mean_std(defined)
        out.append(AggregateRow(name, len(dsc[name]), dm, ds, hm, hs,
                                len(defined), len(hd[name]) - len(defined)))
    return out


def _num(x, nd=4) -> str:
    return "undefined" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.{nd}f}"


def render_table(agg: list[AggregateRow]) -> str:
    """Aligned text table: one line per class, mean ± std."""
    head = ("class", "cases", "DSC", "HD95 (mm)", "HD95 undefined")
    body = []
    for a in agg:
        h = "undefined" if a.hd95_mean is None else f"{a.hd95_mean:.2f} ± {a.hd95_std:.2f}"
        body.append((a.class_name, str(a.n_cases), f"{a.dsc_mean:.4f} ± {a.dsc_std:.4f}", h,
                     str(a.hd95_undefined)))
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [head] + body]
    return "\n".join(lines) + "\n"


def render_case_rows(case_id: str, rows: list[MetricRow]) -> str:
    return "".join(f"{case_id}  {r.class_name}  dsc={_num(r.dsc)}  hd95={_num(r.hd95, 2)}\n"
                   for r in rows)


def eval_record(per_case: dict, agg: list[AggregateRow], problems=()) -> dict:
    return {
        "cases": {k: [r.to_dict() for r in v] for k, v in per_case.items()},
        "aggregate": [a.to_dict() for a in agg],
        "problems": list(problems),
    }


def eval_json(per_case: dict, agg: list[AggregateRow], problems=()) -> str:
    return json.dumps(eval_record(per_case, agg, problems), indent=2) + "\n"


__all__ = [
    "AggregateRow", "DEFAULT_CLASSES", "MetricRow", "aggregate", "dice",
    "directed_surface_distances", "eval_json", "eval_record", "evaluate_case", "hausdorff",
    "hd95", "render_case_rows", "render_table", "surface_distances",
]
