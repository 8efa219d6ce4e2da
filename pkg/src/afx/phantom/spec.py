"""Parametric description of a synthetic dissected aorta.

Geometry is expressed in a model frame.  Along the trajectory each point has
arclength ``s`` from the root, unit tangent ``T``, a fixed binormal ``B = +y``
and ``N = B x T`` (pointing to the inner curvature on the candy-cane).  Angles
in a cross-section are measured from ``N`` towards ``B``.  The z axis points
caudally, so the root sits at the smallest z.

The true lumen is the angular sector ``theta(s) +- span(s)/2``; the flap is
every lumen point within ``flap_half_width`` of either sector boundary ray.
Tears are punched through the flap on the first ray (``theta - span/2``).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from afx.errors import SpecError
from afx.phantom.areas import hole_clear_of_other_flap
from afx.volume_io import VoxelSpacing

SUPPLIES = ("TL", "FL", "both")
# Flap half-width in units of the coarsest voxel spacing, before twist inflation.
FLAP_HALF_WIDTH_FACTOR = 0.575


def _interp(knots, s):
    k = np.asarray(knots, dtype=float)
    return np.interp(s, k[:, 0], k[:, 1])


@dataclass(frozen=True)
class Trajectory:
    """``straight`` runs along +z; ``candy-cane`` rises (towards -z), arcs 180 degrees and descends.

    Internally the curve is built with z pointing cranially and mirrored on output.
    """

    kind: str
    length: float = 0.0        # straight
    ascending: float = 0.0     # candy-cane
    arc_radius: float = 0.0
    descending: float = 0.0

    @property
    def total_length(self) -> float:
        if self.kind == "straight":
            return float(self.length)
        return float(self.ascending + math.pi * self.arc_radius + self.descending)

    @property
    def arc_range(self) -> tuple[float, float]:
        if self.kind == "straight":
            return (0.0, 0.0)
        return (self.ascending, self.ascending + math.pi * self.arc_radius)

    def frame(self, s):
        """Points, tangents and inner normals at arclengths ``s`` (each shape (n, 3))."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        P = np.zeros((s.size, 3))
        T = np.zeros((s.size, 3))
        if self.kind == "straight":
            P[:, 2] = -s
            T[:, 2] = -1.0
        else:
            a, R = self.ascending, self.arc_radius
            asc = s <= a
            dsc = s >= a + math.pi * R
            arc = ~asc & ~dsc
            P[asc, 2] = s[asc]
            T[asc, 2] = 1.0
            psi = (s[arc] - a) / R
            P[arc, 0] = R - R * np.cos(psi)
            P[arc, 2] = a + R * np.sin(psi)
            T[arc, 0] = np.sin(psi)
            T[arc, 2] = np.cos(psi)
            t = s[dsc] - a - math.pi * R
            P[dsc, 0] = 2 * R
            P[dsc, 2] = a - t
            T[dsc, 2] = -1.0
        # N = y x T in the cranial-up frame, then mirror z
        N = np.column_stack([T[:, 2], np.zeros(s.size), -T[:, 0]])
        for a in (P, T, N):
            a[:, 2] *= -1.0
        return P, T, N

    def project(self, p: np.ndarray):
        """Nearest trajectory coordinates of model points ``p`` (shape (..., 3)).

        Returns ``(s, u, v, valid)`` where ``(u, v)`` are the in-plane offsets
        along N and B and ``valid`` is False beyond the end caps.
        """
        x, y, z = p[..., 0], p[..., 1], -p[..., 2]
        if self.kind == "straight":
            s = -z
            valid = (s >= 0) & (s <= self.length)
            return s, -x, y, valid
        a, R, d = self.ascending, self.arc_radius, self.descending
        inf = np.inf
        # ascending: x = 0, z in [0, a]
        v_asc = (z >= 0) & (z <= a)
        d_asc = np.where(v_asc, x * x + y * y, inf)
        # arc around (R, *, a)
        rx, rz = x - R, z - a
        psi = np.arctan2(rz, -rx)
        v_arc = (psi >= 0) & (psi <= math.pi)
        rr = np.hypot(rx, rz)
        d_arc = np.where(v_arc, (rr - R) ** 2 + y * y, inf)
        # descending: x = 2R, z in [a - d, a]
        v_dsc = (z <= a) & (z >= a - d)
        d_dsc = np.where(v_dsc, (x - 2 * R) ** 2 + y * y, inf)
        best = np.argmin(np.stack([d_asc, d_arc, d_dsc]), axis=0)
        valid = np.choose(best, [v_asc, v_arc, v_dsc])
        s = np.choose(best, [z, a + R * psi, a + math.pi * R + (a - z)])
        # in-plane N component
        u_asc = x
        u_arc = R - rr  # towards the arc centre
        u_dsc = 2 * R - x
        u = np.choose(best, [u_asc, u_arc, u_dsc])
        return s, u, y, valid


@dataclass(frozen=True)
class FlapSpec:
    theta: tuple  # ((s, deg), ...) sector centre
    span: tuple   # ((s, deg), ...) true-lumen angular width
    half_width: float | None = None

    def theta_at(self, s):
        return np.deg2rad(_interp(self.theta, s))

    def span_at(self, s):
        return np.deg2rad(_interp(self.span, s))

    def max_ray_rate(self) -> float:
        """Largest |d(ray angle)/ds| in rad/mm over the piecewise-linear knots."""
        rate = 0.0
        s_all = sorted({k[0] for k in self.theta} | {k[0] for k in self.span})
        for lo, hi in zip(s_all[:-1], s_all[1:]):
            if hi - lo <= 0:
                continue
            dt = (self.theta_at(hi) - self.theta_at(lo)) / (hi - lo)
            dw = (self.span_at(hi) - self.span_at(lo)) / (hi - lo)
            rate = max(rate, abs(dt - 0.5 * dw), abs(dt + 0.5 * dw))
        return float(rate)


@dataclass(frozen=True)
class TearSpec:
    arclength: float
    diameter: float
    radial: float | None = None  # centre distance from the axis along ray 1

    @property
    def area(self) -> float:
        return math.pi * (0.5 * self.diameter) ** 2


@dataclass(frozen=True)
class BranchSpec:
    name: str
    territory: str
    ostium: float          # arclength of the origin on the aortic centreline
    angle: float           # direction in the section plane, degrees from N towards B
    radius: float
    length: float          # beyond the aortic wall
    supply: str
    flap_into_branch: bool = False
    expected_zone: int | None = None
    flap_depth: float = 10.0


@dataclass(frozen=True)
class PhantomSpec:
    spacing: VoxelSpacing
    trajectory: Trajectory
    radius: tuple                       # ((s, r_mm), ...)
    flap: FlapSpec | None = None
    tears: tuple = ()
    branches: tuple = ()
    wall_thickness: float = 0.0
    seed: int = 0
    name: str = "phantom"
    padding: float = field(default=4.0)

    # ------------------------------------------------------------- derived
    @property
    def length(self) -> float:
        return self.trajectory.total_length

    def radius_at(self, s):
        return _interp(self.radius, s)

    @property
    def max_radius(self) -> float:
        return float(max(k[1] for k in self.radius))

    @property
    def flap_half_width(self) -> float:
        """In-plane half-width of the flap, inflated where the flap twists.

        A boundary ray turning at rate w tilts the flap surface by atan(r w),
        thinning it across its normal; the inflation keeps at least one
        coarsest voxel of normal thickness so the flap stays 6-separating.
        """
        if self.flap is None:
            return 0.0
        if self.flap.half_width is not None:
            return float(self.flap.half_width)
        h0 = FLAP_HALF_WIDTH_FACTOR * max(self.spacing)
        return h0 * math.sqrt(1.0 + (self.max_radius * self.flap.max_ray_rate()) ** 2)

    def _supply_clearance(self, branch: BranchSpec) -> tuple[float, float]:
        """(footprint half-angle, flap clearance) in radians at the branch ostium."""
        r = float(self.radius_at(branch.ostium))
        foot = math.asin(min(1.0, branch.radius / r))
        clear = (self.flap_half_width + 1.5 * max(self.spacing)) / r
        return foot, clear

    def branch_supply_consistent(self, branch: BranchSpec) -> bool:
        """Whether the branch direction actually meets the lumen(s) its ``supply`` names.

        TL/FL branches need their whole footprint, plus flap clearance, inside
        one sector; a ``both`` branch must straddle a boundary ray with
        clearance on each side.
        """
        if self.flap is None:
            return branch.supply == "TL"
        foot, clear = self._supply_clearance(branch)
        ang = math.radians(branch.angle)
        for s in np.linspace(branch.ostium - branch.radius, branch.ostium + branch.radius, 5):
            s = float(np.clip(s, 0.0, self.length))
            theta = float(self.flap.theta_at(s))
            half = 0.5 * float(self.flap.span_at(s))
            off = abs((ang - theta + math.pi) % (2 * math.pi) - math.pi)
            if branch.supply == "TL" and off > half - foot - clear:
                return False
            if branch.supply == "FL" and off < half + foot + clear:
                return False
            if branch.supply == "both" and abs(off - half) > foot - clear:
                return False
        return True

    def tear_radial(self, tear: TearSpec) -> float:
        if tear.radial is not None:
            return float(tear.radial)
        return 0.5 * float(self.radius_at(tear.arclength))

    # ----------------------------------------------------------- validation
    def validate(self) -> "PhantomSpec":
        L = self.length
        t = self.trajectory
        if t.kind not in ("straight", "candy-cane"):
            raise SpecError(f"unknown trajectory {t.kind!r}")
        if L <= 0:
            raise SpecError("trajectory length must be positive")
        if t.kind == "candy-cane":
            if min(t.ascending, t.arc_radius, t.descending) <= 0:
                raise SpecError("candy-cane segments must have positive length")
            if t.descending <= t.ascending:
                raise SpecError("descending limb must be longer than the ascending limb")
            if self.max_radius + self.wall_thickness >= t.arc_radius:
                raise SpecError("aortic radius must be smaller than the arch radius")
        if not self.radius or any(k[1] <= 0 for k in self.radius):
            raise SpecError("radii must be positive")
        if self.wall_thickness < 0:
            raise SpecError("wall thickness must be non-negative")
        if self.flap is not None:
            grid = np.linspace(0.0, L, max(2, int(L * 10) + 1))
            w = np.rad2deg(self.flap.span_at(grid))
            if w.min() <= 0 or w.max() >= 360:
                raise SpecError("true-lumen span must stay inside (0, 360) degrees")
            if self.flap_half_width < 0.5 * max(self.spacing):
                raise SpecError("flap must be at least one voxel thick")
        if self.tears and self.flap is None:
            raise SpecError("tears require a flap")
        h = self.flap_half_width
        for tear in self.tears:
            if not 0.0 <= tear.arclength <= L:
                raise SpecError(f"tear at s={tear.arclength} outside [0, {L}]")
            if tear.diameter <= 0:
                raise SpecError("tear diameter must be positive")
            rt = self.tear_radial(tear)
            c0 = 0.5 * tear.diameter
            if tear.arclength - c0 < 0 or tear.arclength + c0 > L:
                raise SpecError(f"tear at s={tear.arclength} runs past the trajectory ends")
            for s in np.linspace(tear.arclength - c0, tear.arclength + c0, 41):
                c = math.sqrt(max(c0 * c0 - (s - tear.arclength) ** 2, 0.0))
                if not hole_clear_of_other_flap(float(self.radius_at(s)), h,
                                                float(self.flap.span_at(s)),
                                                rt - c, rt + c):
                    raise SpecError(f"tear at s={tear.arclength} does not fit on its flap ray")
        names = set()
        for b in self.branches:
            if b.name in names:
                raise SpecError(f"duplicate branch {b.name}")
            names.add(b.name)
            if not 0.0 < b.ostium < L:
                raise SpecError(f"branch {b.name} ostium outside the trajectory")
            if b.radius <= 0 or b.length <= 0:
                raise SpecError(f"branch {b.name} needs positive radius and length")
            if b.supply not in SUPPLIES:
                raise SpecError(f"branch {b.name}: supply must be one of {SUPPLIES}")
            if b.supply != "TL" and self.flap is None:
                raise SpecError(f"branch {b.name}: FL supply requires a flap")
            if b.radius >= float(self.radius_at(b.ostium)):
                raise SpecError(f"branch {b.name} wider than the aorta")
            if not self.branch_supply_consistent(b):
                raise SpecError(f"branch {b.name}: direction does not match supply {b.supply}")
            if b.expected_zone is not None and not 0 <= b.expected_zone <= 11:
                raise SpecError(f"branch {b.name}: zone outside [0, 11]")
        return self

    # -------------------------------------------------------- serialization
    def to_dict(self) -> dict:
        d = asdict(self)
        d["spacing"] = list(self.spacing)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        try:
            flap = d.get("flap")
            return cls(
                spacing=VoxelSpacing(*d["spacing"]),
                trajectory=Trajectory(**d["trajectory"]),
                radius=tuple(tuple(k) for k in d["radius"]),
                flap=None if flap is None else FlapSpec(
                    theta=tuple(tuple(k) for k in flap["theta"]),
                    span=tuple(tuple(k) for k in flap["span"]),
                    half_width=flap.get("half_width"),
                ),
                tears=tuple(TearSpec(**t) for t in d.get("tears", ())),
                branches=tuple(BranchSpec(**b) for b in d.get("branches", ())),
                wall_thickness=d.get("wall_thickness", 0.0),
                seed=d.get("seed", 0),
                name=d.get("name", "phantom"),
                padding=d.get("padding", 4.0),
            )
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed phantom spec: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "PhantomSpec":
        return cls.from_dict(json.loads(text))
