"""Automatic root/distal seeds for the aortic centerline.

The two lumen extremities are found by a double sweep over the voxel graph
(farthest voxel in 26-neighbour hops from an arbitrary start, then farthest
from that).  Those extremes sit
on the rim of the end caps, so each is moved onto the vessel axis: a local
axis direction is estimated from a preliminary medial path and the seed is
the last lumen voxel along that axis.  The root is the extremity with the
smaller z (z runs cranio-caudally).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from afx.errors import AnalysisError
from afx.geometry.centerline import VoxelGraph, shortest_medial_path
from afx.geometry.components import largest_component
from afx.geometry.distance import distance_transform
from afx.geometry.mask import VoxelMask
from afx.volume_io import LabelSchema, LabelVolume


@dataclass(frozen=True)
class Seeds:
    root: tuple[int, int, int]
    distal: tuple[int, int, int]


def aortic_lumen(volume: LabelVolume, schema: LabelSchema) -> VoxelMask:
    """Largest 26-connected component of TL, FL and flap together."""
    bits = np.isin(volume.data, schema.lumen_labels)
    if not bits.any():
        raise AnalysisError("no aortic lumen segmented")
    return VoxelMask(largest_component(bits), volume.spacing)


def _farthest(graph: VoxelGraph, hops_matrix, source: int) -> int:
    """Node with the most 26-neighbour hops from ``source`` (lowest index on ties)."""
    d = csgraph.dijkstra(hops_matrix, indices=source, unweighted=True)
    d[~np.isfinite(d)] = -1.0
    return int(np.argmax(d))


def _axis_end(mask: VoxelMask, pts: np.ndarray, dts: np.ndarray, fallback):
    """Extend the medial part of a path (``pts`` starting at the end of interest) to the cap.

    The path leaves the cap rim diagonally; from the first point that is as
    deep as the vessel's typical depth, the local axis is fitted over a short
    window and followed outwards to the last lumen voxel.
    """
    medial = np.flatnonzero(dts >= 0.9 * np.median(dts))
    if medial.size == 0:
        return fallback
    i0 = int(medial[0])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    window = max(6.0, 0.75 * float(np.median(dts)))
    sel = (s >= s[i0]) & (s <= s[i0] + window)
    if np.count_nonzero(sel) < 3:
        return fallback
    w = pts[sel]
    centre = w.mean(axis=0)
    _, _, vt = np.linalg.svd(w - centre)
    t = vt[0]
    if np.dot(pts[i0] - w[-1], t) < 0:
        t = -t
    sp = mask.spacing.as_array()
    step = 0.25 * float(sp.min())
    shape = np.asarray(mask.bits.shape)
    # start from the fitted line, level with the deepest-entry point
    q = centre + np.dot(pts[i0] - centre, t) * t
    best = None
    for k in range(int(np.ceil((s[i0] + window) / step)) + 1):
        idx = np.floor((q + k * step * t) / sp + 0.5).astype(int)
        if np.any(idx < 0) or np.any(idx >= shape) or not mask.bits[tuple(idx)]:
            break
        best = tuple(int(c) for c in idx)
    return best if best is not None else fallback


def derive_seeds(lumen: VoxelMask, graph: VoxelGraph | None = None,
                 dt: np.ndarray | None = None) -> Seeds:
    if lumen.count < 2:
        raise AnalysisError("aortic lumen too small for a centerline")
    graph = graph or VoxelGraph(lumen.bits, lumen.spacing)
    if dt is None:
        dt = distance_transform(lumen)
    hops = graph.matrix(np.ones_like(graph.length))
    a_node = _farthest(graph, hops, 0)
    b_node = _farthest(graph, hops, a_node)
    a, b = graph.voxel(a_node), graph.voxel(b_node)
    if a == b:
        raise AnalysisError("aortic lumen has no extent")
    path = shortest_medial_path(lumen, a, b, dt=dt, graph=graph)
    pts = np.asarray(path, dtype=float) * lumen.spacing.as_array()
    dts = dt[tuple(np.asarray(path).T)]
    ends = [_axis_end(lumen, pts, dts, a), _axis_end(lumen, pts[::-1], dts[::-1], b)]
    if ends[0] == ends[1]:
        ends = [a, b]
    ends.sort(key=lambda v: (v[2], v))
    return Seeds(root=ends[0], distal=ends[1])
