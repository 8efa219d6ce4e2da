"""Voxelize a :class:`PhantomSpec` and derive its ground truth.

Voxels are classified by their centre against the continuous model, so the
labels agree with the analytic regions exactly at voxel centres.  Truth values
come from the spec alone: lumen areas from :mod:`afx.phantom.areas` on a
0.1 mm arclength grid, tear and branch facts from the declared parameters.
"""
from __future__ import annotations

import copy
import functools
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from afx.errors import SpecError
from afx.phantom.areas import section_areas
from afx.phantom.spec import PhantomSpec
from afx.taxonomy import default_schema
from afx.volume_io import LabelSchema, LabelVolume

TRUTH_STEP_MM = 0.1
DEFAULT_MIN_TEAR_AREA = 10.0
TLC_WARN_PCT = 10.0
FLAR_RISK_PCT = 60.0
SIGNIFICANT_TEAR_RATIO = 0.5

# Zone lengths (mm) used past the most distal anchored zone.
DEFAULT_ZONE_LENGTHS_MM = (30, 20, 20, 20, 80, 80, 20, 20, 20, 80, 50, 70)

_CHUNK = 24


@dataclass
class PhantomTruth:
    centerline_length: float
    min_tlc_pct: float
    min_tlc_arclength: float
    max_flar_pct: float
    max_flar_arclength: float
    descending_start: float
    tlc_warning: bool
    flar_risk: bool
    zone_boundaries: list | None
    tears: list = field(default_factory=list)     # dicts sorted by arclength
    primary_tear: dict | None = None
    bvi: dict = field(default_factory=dict)      # name -> dict

    def to_dict(self) -> dict:
        return asdict(self)


# ------------------------------------------------------------------ zones

def truth_zone_boundaries(anchors: dict[int, float], total: float):
    """Zone boundaries from anchored zone ends; None when fewer than two anchors."""
    if len(anchors) < 2:
        return None
    keys = sorted(anchors)
    if any(anchors[a] >= anchors[b] for a, b in zip(keys[:-1], keys[1:])):
        return None
    bounds = [0.0] * 12
    first, last = keys[0], keys[-1]
    for m in range(first + 1):
        bounds[m] = anchors[first] * (m + 1) / (first + 1)
    for a, b in zip(keys[:-1], keys[1:]):
        for m in range(a, b + 1):
            bounds[m] = anchors[a] + (anchors[b] - anchors[a]) * (m - a) / (b - a)
    tail = [float(DEFAULT_ZONE_LENGTHS_MM[m]) for m in range(last + 1, 12)]
    remaining = total - anchors[last]
    if tail:
        if remaining <= 0:
            return None
        scale = min(1.0, remaining / sum(tail))
        acc = anchors[last]
        for i, m in enumerate(range(last + 1, 12)):
            acc += tail[i] * scale
            bounds[m] = acc
    return bounds


def truth_zone(s: float, bounds) -> int | None:
    if bounds is None:
        return None
    for i, b in enumerate(bounds):
        if s <= b:
            return i
    return 11


def bvi_truth(supply: str, flap_into_branch: bool) -> dict:
    fl = supply in ("FL", "both")
    tl = supply in ("TL", "both")
    flap = bool(flap_into_branch)
    if flap and fl:
        involvement = "mixed"
    elif flap:
        involvement = "static"
    elif fl:
        involvement = "dynamic"
    else:
        involvement = "none"
    return {
        "involvement": involvement,
        "flap_extends": flap,
        "fl_supplies": fl,
        "tl_supplies": tl,
    }


# ---------------------------------------------------------------- truth

def _hole_lengths(spec: PhantomSpec, s: float) -> tuple[float, ...]:
    out = []
    for tear in spec.tears:
        c0 = 0.5 * tear.diameter
        ds = s - tear.arclength
        if abs(ds) < c0:
            out.append(2.0 * math.sqrt(c0 * c0 - ds * ds))
    return tuple(out)


def lumen_profile_truth(spec: PhantomSpec, step: float = TRUTH_STEP_MM):
    """Analytic (s, tlc_pct, flar_pct) on a dense arclength grid."""
    L = spec.length
    s = np.linspace(0.0, L, int(round(L / step)) + 1)
    r = spec.radius_at(s)
    h = spec.flap_half_width
    if spec.flap is None:
        return s, np.full(s.size, 100.0), np.zeros(s.size)
    w = spec.flap.span_at(s)
    tlc = np.empty(s.size)
    flar = np.empty(s.size)
    cache = {}
    for i in range(s.size):
        holes = _hole_lengths(spec, float(s[i]))
        key = (float(r[i]), float(w[i]), holes)
        a = cache.get(key)
        if a is None:
            a = cache[key] = section_areas(float(r[i]), h, float(w[i]), holes)
        tlc[i] = a.tlc_pct
        flar[i] = a.flar_pct
    return s, tlc, flar


def compute_truth(spec: PhantomSpec, min_tear_area: float = DEFAULT_MIN_TEAR_AREA,
                  tlc_warn_pct: float = TLC_WARN_PCT,
                  flar_risk_pct: float = FLAR_RISK_PCT) -> PhantomTruth:
    """Ground truth of ``spec``; memoized, so callers get a fresh copy."""
    return copy.deepcopy(_truth(spec, min_tear_area, tlc_warn_pct, flar_risk_pct))


@functools.lru_cache(maxsize=256)
def _truth(spec, min_tear_area, tlc_warn_pct, flar_risk_pct) -> PhantomTruth:
    L = spec.length
    s, tlc, flar = lumen_profile_truth(spec)
    i_min = int(np.argmin(tlc))
    anchors: dict[int, float] = {}
    for b in spec.branches:
        if b.expected_zone is not None:
            anchors[b.expected_zone] = max(anchors.get(b.expected_zone, -np.inf), b.ostium)
    bounds = truth_zone_boundaries(anchors, L)
    desc = bounds[3] if bounds is not None else 0.0
    sel = np.flatnonzero(s >= desc)
    i_max = int(sel[np.argmax(flar[sel])])

    tears = []
    for t in sorted(spec.tears, key=lambda t: t.arclength):
        tears.append({
            "arclength": float(t.arclength),
            "diameter": float(t.diameter),
            "area": t.area,
            "zone": truth_zone(t.arclength, bounds),
        })
    primary = None
    kept = [t for t in tears if t["area"] >= min_tear_area]
    if kept:
        biggest = max(t["area"] for t in kept)
        for t in kept:
            if t["area"] >= SIGNIFICANT_TEAR_RATIO * biggest:
                primary = t
                break

    return PhantomTruth(
        centerline_length=float(L),
        min_tlc_pct=float(tlc[i_min]),
        min_tlc_arclength=float(s[i_min]),
        max_flar_pct=float(flar[i_max]),
        max_flar_arclength=float(s[i_max]),
        descending_start=float(desc),
        tlc_warning=bool(tlc[i_min] < tlc_warn_pct),
        flar_risk=bool(flar[i_max] > flar_risk_pct),
        zone_boundaries=None if bounds is None else [float(b) for b in bounds],
        tears=tears,
        primary_tear=primary,
        bvi={b.name: bvi_truth(b.supply, b.flap_into_branch) for b in spec.branches},
    )


# ------------------------------------------------------------ voxelize

def _branch_frames(spec: PhantomSpec):
    out = []
    for b in spec.branches:
        P, T, N = spec.trajectory.frame(b.ostium)
        P, T, N = P[0], T[0], N[0]
        B = np.array([0.0, 1.0, 0.0])
        ang = math.radians(b.angle)
        d = math.cos(ang) * N + math.sin(ang) * B
        m = np.cross(d, T)
        m /= np.linalg.norm(m)
        r0 = float(spec.radius_at(b.ostium))
        out.append((b, P, d, m, r0))
    return out


def _bounds(spec: PhantomSpec, frames):
    L = spec.length
    s = np.linspace(0.0, L, max(2, int(math.ceil(L)) + 1))
    P, _, _ = spec.trajectory.frame(s)
    ext = spec.max_radius + spec.wall_thickness
    lo = P.min(axis=0) - ext
    hi = P.max(axis=0) + ext
    for b, P0, d, _, r0 in frames:
        for a in (r0, r0 + b.length):
            q = P0 + a * d
            lo = np.minimum(lo, q - b.radius)
            hi = np.maximum(hi, q + b.radius)
    return lo, hi


def branch_label_ids(spec: PhantomSpec, schema: LabelSchema) -> dict[str, int]:
    by_name = {e.name: e.label for e in schema.branches}
    ids = {}
    for b in spec.branches:
        if b.name not in by_name:
            raise SpecError(f"branch {b.name!r} is not in the label taxonomy")
        ids[b.name] = by_name[b.name]
    return ids


def grid_placement(spec: PhantomSpec, frames=None):
    """``(shift, dims)``: voxel ``idx`` has model coordinates ``idx * spacing - shift``.

    The seed jitters the grid by up to one voxel so that phantoms do not all
    share the same alignment with the trajectory.
    """
    sp = spec.spacing.as_array()
    frames = _branch_frames(spec) if frames is None else frames
    lo, hi = _bounds(spec, frames)
    rng = np.random.default_rng(spec.seed)
    jitter = rng.random(3) * sp
    shift = -lo + spec.padding + jitter
    dims = np.ceil((hi - lo + 2 * spec.padding + sp) / sp).astype(int) + 1
    return shift, tuple(int(n) for n in dims)


def generate(spec: PhantomSpec):
    """Return ``(LabelVolume, LabelSchema, PhantomTruth)`` for ``spec``."""
    spec.validate()
    full = default_schema()
    tl_id, fl_id, flap_id = full.true_lumen, full.false_lumen, full.flap
    wall_id = full.label_of("aortic-wall")
    bids = branch_label_ids(spec, full)

    sp = spec.spacing.as_array()
    frames = _branch_frames(spec)
    shift, (nx, ny, nz) = grid_placement(spec, frames)

    traj = spec.trajectory
    L = spec.length
    h = spec.flap_half_width
    data = np.zeros((nx, ny, nz), dtype=np.uint16)
    xs = np.arange(nx) * sp[0] - shift[0]
    ys = np.arange(ny) * sp[1] - shift[1]

    for k0 in range(0, nz, _CHUNK):
        k1 = min(nz, k0 + _CHUNK)
        zs = np.arange(k0, k1) * sp[2] - shift[2]
        X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
        p = np.stack([X, Y, Z], axis=-1)
        s, u, v, valid = traj.project(p)
        sc = np.clip(s, 0.0, L)
        r = spec.radius_at(sc)
        rho = np.hypot(u, v)
        inside = valid & (rho <= r)
        label = np.zeros(X.shape, dtype=np.uint16)
        if spec.wall_thickness > 0:
            wall = valid & (rho > r) & (rho <= r + spec.wall_thickness)
            label[wall] = wall_id
        for b, P0, d, m, r0 in frames:
            rel = p - P0
            a = rel @ d
            perp2 = np.einsum("...i,...i->...", rel, rel) - a * a
            in_b = (a >= 0) & (a <= r0 + b.length) & (perp2 <= b.radius ** 2) & ~inside
            label[in_b] = bids[b.name]
            if b.flap_into_branch:
                sheet = in_b & (np.abs(rel @ m) <= h) & (a <= r0 + b.flap_depth)
                label[sheet] = flap_id
        if spec.flap is None:
            label[inside] = tl_id
        else:
            theta = spec.flap.theta_at(sc)
            w = spec.flap.span_at(sc)
            a1 = theta - 0.5 * w
            a2 = theta + 0.5 * w
            dist = np.minimum(_ray_distance(u, v, rho, a1), _ray_distance(u, v, rho, a2))
            in_flap = inside & (dist <= h)
            if spec.tears:
                t1 = u * np.cos(a1) + v * np.sin(a1)
                n1 = -u * np.sin(a1) + v * np.cos(a1)
                on_ray1 = in_flap & (t1 >= 0) & (np.abs(n1) <= h)
                hole = np.zeros(X.shape, dtype=bool)
                for tear in spec.tears:
                    rt = spec.tear_radial(tear)
                    c0 = 0.5 * tear.diameter
                    hole |= on_ray1 & ((t1 - rt) ** 2 + (s - tear.arclength) ** 2 <= c0 * c0)
                in_flap &= ~hole
            phi = np.arctan2(v, u)
            rel_ang = np.abs(np.mod(phi - theta + np.pi, 2 * np.pi) - np.pi)
            in_tl = inside & ~in_flap & (rel_ang <= 0.5 * w)
            label[inside] = fl_id
            label[in_tl] = tl_id
            label[in_flap] = flap_id
        data[:, :, k0:k1] = label

    used = {0, tl_id}
    if spec.flap is not None:
        used |= {fl_id, flap_id}
    if spec.wall_thickness > 0:
        used.add(wall_id)
    used |= set(bids.values())
    declared = {bids[b.name]: b for b in spec.branches}
    schema = LabelSchema(tuple(
        replace(e, territory=declared[e.label].territory, zone=declared[e.label].expected_zone)
        if e.label in declared else e
        for e in full.subset(used).entries
    ))
    volume = LabelVolume(data, spec.spacing)
    return volume, schema, compute_truth(spec)


def _ray_distance(u, v, rho, alpha):
    along = u * np.cos(alpha) + v * np.sin(alpha)
    perp = np.abs(-u * np.sin(alpha) + v * np.cos(alpha))
    return np.where(along >= 0, perp, rho)
