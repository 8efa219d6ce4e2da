"""Medial-axis centerlines by distance-weighted shortest paths.

The path is a Dijkstra geodesic over the 26-connected foreground voxel graph.
Entering voxel ``v`` along an edge of physical length ``l`` costs
``l / (eps + DT(v))**2`` so the cheapest route rides the ridge of the distance
transform rather than hugging the wall.  The voxel path is then smoothed and
resampled at fixed arclength.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from afx.errors import InputError, TopologyError
from afx.geometry.distance import distance_transform
from afx.geometry.mask import VoxelMask

EPS_MM = 0.1
SMOOTH_WINDOW = 5
STEP_MM = 1.0

_OFFSETS = [o for o in product((-1, 0, 1), repeat=3) if o != (0, 0, 0)]


@dataclass(frozen=True)
class Centerline:
    points: np.ndarray      # (n, 3) mm
    tangents: np.ndarray    # (n, 3) unit vectors
    arclength: np.ndarray   # (n,) mm, arclength[0] == 0

    def __len__(self):
        return len(self.points)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    def frame(self, i: int) -> "SectionFrame":
        return SectionFrame.from_normal(self.points[i], self.tangents[i])

    def project(self, point) -> float:
        """Arclength of the closest point on the polyline to ``point``."""
        return float(self.project_many(np.asarray(point, dtype=float)[None, :])[0])

    def project_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if len(self.points) == 1:
            return np.zeros(len(pts))
        a = self.points[:-1]
        seg = self.points[1:] - a
        seg_len2 = np.einsum("ij,ij->i", seg, seg)
        out = np.empty(len(pts))
        for n, p in enumerate(pts):
            t = np.clip(np.einsum("ij,ij->i", p - a, seg) / seg_len2, 0.0, 1.0)
            foot = a + t[:, None] * seg
            d2 = np.einsum("ij,ij->i", p - foot, p - foot)
            i = int(np.argmin(d2))
            out[n] = self.arclength[i] + t[i] * (self.arclength[i + 1] - self.arclength[i])
        return out

    def nearest_index(self, point) -> int:
        d2 = np.sum((self.points - np.asarray(point, dtype=float)) ** 2, axis=1)
        return int(np.argmin(d2))


@dataclass(frozen=True)
class SectionFrame:
    origin: np.ndarray
    normal: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @classmethod
    def from_normal(cls, origin, normal) -> "SectionFrame":
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        helper = np.zeros(3)
        helper[int(np.argmin(np.abs(n)))] = 1.0
        u = np.cross(helper, n)
        u /= np.linalg.norm(u)
        v = np.cross(n, u)
        return cls(np.asarray(origin, dtype=float), n, u, v)


class VoxelGraph:
    """26-connected graph over the foreground voxels of a mask.

    Edges are stored in CSR order (grouped by source node), so weighted
    sparse matrices are built without any conversion.
    """

    def __init__(self, bits: np.ndarray, spacing):
        self.shape = bits.shape
        self.flat = np.flatnonzero(bits.ravel())
        n = self.flat.size
        index = np.full(bits.shape, -1, dtype=np.int64)
        index.ravel()[self.flat] = np.arange(n)
        self.index = index
        sp = np.asarray(tuple(spacing), dtype=float)
        padded = np.pad(index, 1, constant_values=-1)
        coords = np.column_stack(np.unravel_index(self.flat, bits.shape)) + 1
        offsets = np.array(_OFFSETS)
        nbr = np.empty((n, len(_OFFSETS)), dtype=np.int64)
        for k, off in enumerate(offsets):
            c = coords + off
            nbr[:, k] = padded[c[:, 0], c[:, 1], c[:, 2]]
        valid = nbr >= 0
        lengths = np.sqrt(np.sum((offsets * sp) ** 2, axis=1))
        self.dst = nbr[valid]
        self.src = np.repeat(np.arange(n), valid.sum(axis=1))
        self.length = np.broadcast_to(lengths, nbr.shape)[valid]
        self.indptr = np.concatenate([[0], np.cumsum(valid.sum(axis=1))])

    @property
    def n(self) -> int:
        return int(self.flat.size)

    def matrix(self, weights: np.ndarray) -> sparse.csr_matrix:
        """Sparse adjacency with ``weights`` aligned to ``src``/``dst``."""
        return sparse.csr_matrix((weights, self.dst, self.indptr), shape=(self.n, self.n))

    def node(self, voxel) -> int:
        voxel = tuple(int(c) for c in voxel)
        if any(c < 0 or c >= s for c, s in zip(voxel, self.shape)):
            raise InputError(f"voxel {voxel} outside the grid {self.shape}")
        node = int(self.index[voxel])
        if node < 0:
            raise InputError(f"voxel {voxel} is not foreground")
        return node

    def voxel(self, node: int) -> tuple[int, int, int]:
        return tuple(int(c) for c in np.unravel_index(self.flat[node], self.shape))


def geodesic_distances(mask: VoxelMask, source, graph: VoxelGraph | None = None) -> np.ndarray:
    """Within-mask path length (mm) from ``source`` to every voxel; inf where unreachable."""
    graph = graph or VoxelGraph(mask.bits, mask.spacing)
    dist = csgraph.dijkstra(graph.matrix(graph.length), indices=graph.node(source))
    out = np.full(mask.bits.shape, np.inf)
    out.ravel()[graph.flat] = dist
    return out


def _smooth(points: np.ndarray, window: int) -> np.ndarray:
    # Symmetric moving average whose half-width shrinks at the ends, so
    # endpoints stay fixed and straight runs are reproduced exactly.
    n = len(points)
    half = window // 2
    csum = np.vstack([np.zeros((1, 3)), np.cumsum(points, axis=0)])
    idx = np.arange(n)
    k = np.minimum(half, np.minimum(idx, n - 1 - idx))
    return (csum[idx + k + 1] - csum[idx - k]) / (2 * k + 1)[:, None]


def _resample(points: np.ndarray, step: float) -> tuple[np.ndarray, np.ndarray]:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    keep = np.concatenate([[True], seg > 1e-12])
    points = points[keep]
    seg = seg[seg > 1e-12]
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    nseg = max(1, int(round(total / step)))
    stations = np.linspace(0.0, total, nseg + 1)
    out = np.column_stack([np.interp(stations, s, points[:, d]) for d in range(3)])
    return out, stations


def _tangents(points: np.ndarray) -> np.ndarray:
    t = np.gradient(points, axis=0)
    return t / np.linalg.norm(t, axis=1, keepdims=True)


def polyline_to_centerline(points: np.ndarray, step: float = STEP_MM,
                           window: int = SMOOTH_WINDOW) -> Centerline:
    pts = _smooth(np.asarray(points, dtype=float), window)
    pts, _ = _resample(pts, step)
    # Arclength of the final polyline, not of the pre-resampling curve.
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    return Centerline(pts, _tangents(pts), arc)


def shortest_medial_path(mask: VoxelMask, seed_root, seed_distal, *, eps: float = EPS_MM,
                         dt: np.ndarray | None = None,
                         graph: VoxelGraph | None = None) -> list[tuple[int, int, int]]:
    graph = graph or VoxelGraph(mask.bits, mask.spacing)
    src = graph.node(seed_root)
    dst = graph.node(seed_distal)
    if src == dst:
        raise InputError("root and distal seeds coincide")
    if dt is None:
        dt = distance_transform(mask)
    dt_nodes = dt.ravel()[graph.flat]
    weights = graph.length / (eps + dt_nodes[graph.dst]) ** 2
    dist, pred = csgraph.dijkstra(graph.matrix(weights), indices=src, return_predecessors=True)
    if not np.isfinite(dist[dst]):
        raise TopologyError("root and distal seeds are not connected within the mask")
    path = [dst]
    while path[-1] != src:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return [graph.voxel(p) for p in path]


def extract_centerline(lumen: VoxelMask, seed_root, seed_distal, *, step: float = STEP_MM,
                       eps: float = EPS_MM, window: int = SMOOTH_WINDOW,
                       dt: np.ndarray | None = None,
                       graph: VoxelGraph | None = None) -> Centerline:
    """Centerline from ``seed_root`` to ``seed_distal`` (voxel indices) through ``lumen``.

    Raises InputError when a seed is background and TopologyError when the
    seeds lie in different components.
    """
    path = shortest_medial_path(lumen, seed_root, seed_distal, eps=eps, dt=dt, graph=graph)
    pts = np.asarray(path, dtype=float) * lumen.spacing.as_array()
    return polyline_to_centerline(pts, step=step, window=window)
