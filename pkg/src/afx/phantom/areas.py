"""Closed-form cross-section areas of the phantom's lumen partition.

In the plane normal to the trajectory the aorta is the disk ``|x| <= r``.
The intimal flap is every point within ``h`` of either boundary ray of the
true-lumen sector, i.e. the union of two half-strips and the small disk
``|x| <= h`` around the axis.  Every region involved is a convex polygon
intersected with a centred disk, so areas are exact sums of
triangle/circular-sector pieces; inclusion-exclusion handles the overlaps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

Point = tuple[float, float]


def _cross(a: Point, b: Point) -> float:
    return a[0] * b[1] - a[1] * b[0]


def _dot(a: Point, b: Point) -> float:
    return a[0] * b[0] + a[1] * b[1]


def clip(poly: list[Point], n: Point, c: float) -> list[Point]:
    """Sutherland-Hodgman clip of a convex polygon to the half-plane ``n.x <= c``."""
    out: list[Point] = []
    m = len(poly)
    for i in range(m):
        p = poly[i]
        q = poly[(i + 1) % m]
        fp = _dot(n, p) - c
        fq = _dot(n, q) - c
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def polygon_area(poly: list[Point]) -> float:
    return 0.5 * sum(_cross(poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly)))


def _triangle_disk(a: Point, b: Point, r: float) -> float:
    """Signed area of triangle (origin, a, b) intersected with the disk of radius r."""
    d = (b[0] - a[0], b[1] - a[1])
    dd = _dot(d, d)
    pts = [a]
    if dd > 0:
        ad = _dot(a, d)
        disc = ad * ad - dd * (_dot(a, a) - r * r)
        if disc > 0:
            sq = math.sqrt(disc)
            for t in sorted(((-ad - sq) / dd, (-ad + sq) / dd)):
                if 0.0 < t < 1.0:
                    pts.append((a[0] + t * d[0], a[1] + t * d[1]))
    pts.append(b)
    total = 0.0
    r2 = r * r
    for p, q in zip(pts[:-1], pts[1:]):
        mid = (0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]))
        if _dot(mid, mid) <= r2:
            total += 0.5 * _cross(p, q)
        else:
            total += 0.5 * r2 * math.atan2(_cross(p, q), _dot(p, q))
    return total


def polygon_disk_area(poly: list[Point], r: float) -> float:
    """Area of a counter-clockwise convex polygon intersected with ``|x| <= r``."""
    if len(poly) < 3:
        return 0.0
    m = len(poly)
    return abs(sum(_triangle_disk(poly[i], poly[(i + 1) % m], r) for i in range(m)))


def _unit(angle: float) -> Point:
    return (math.cos(angle), math.sin(angle))


def half_strip(angle: float, h: float, length: float) -> list[Point]:
    """Points within ``h`` of the ray at ``angle`` that project onto ``[0, length]``."""
    d = _unit(angle)
    n = (-d[1], d[0])
    return [
        (-h * n[0], -h * n[1]),
        (length * d[0] - h * n[0], length * d[1] - h * n[1]),
        (length * d[0] + h * n[0], length * d[1] + h * n[1]),
        (h * n[0], h * n[1]),
    ]


def half_strip_planes(angle: float, h: float, length: float) -> list[tuple[Point, float]]:
    d = _unit(angle)
    n = (-d[1], d[0])
    return [((-d[0], -d[1]), 0.0), (d, length), (n, h), ((-n[0], -n[1]), h)]


def cone_planes(start: float, span: float) -> list[tuple[Point, float]]:
    """Half-planes whose intersection is the cone swept CCW from ``start`` over ``span`` <= pi."""
    d1 = _unit(start)
    d2 = _unit(start + span)
    return [((d1[1], -d1[0]), 0.0), ((-d2[1], d2[0]), 0.0)]


def clip_all(poly: list[Point], planes) -> list[Point]:
    for n, c in planes:
        if not poly:
            break
        poly = clip(poly, n, c)
    return poly


@dataclass(frozen=True)
class SectionAreas:
    tl: float
    fl: float
    flap: float

    @property
    def total(self) -> float:
        return self.tl + self.fl + self.flap

    @property
    def tlc_pct(self) -> float:
        return 100.0 * self.tl / self.total

    @property
    def flar_pct(self) -> float:
        return 100.0 * self.fl / self.total


def _flap_area_in(r, h, a1, a2, planes, small_disk_area):
    length = 2.0 * r + 2.0 * h
    s1 = half_strip(a1, h, length)
    s2 = half_strip(a2, h, length)
    s12 = clip_all(list(s1), half_strip_planes(a2, h, length))
    if planes:
        s1, s2, s12 = (clip_all(p, planes) for p in (s1, s2, s12))
    # |F ∩ X| for F = S1 ∪ S2 ∪ D_h; terms inside D_r minus the double count in D_h.
    outer = polygon_disk_area(s1, r) + polygon_disk_area(s2, r) - polygon_disk_area(s12, r)
    inner = polygon_disk_area(s1, h) + polygon_disk_area(s2, h) - polygon_disk_area(s12, h)
    return outer - inner + small_disk_area


def section_areas(r: float, h: float, tl_span: float | None,
                  hole_lengths: tuple[float, ...] = ()) -> SectionAreas:
    """Exact TL/FL/flap areas (mm²) of one cross-section.

    ``tl_span`` is the angular width (radians) of the true-lumen sector, or
    None for an undissected section.  The result is rotation invariant, so the
    sector's angular position does not enter.  ``hole_lengths`` are the radial
    extents (mm) along the first boundary ray of tears crossing this plane;
    each removes a ``length x 2h`` rectangle of flap, split evenly between the
    lumens.
    """
    disk = math.pi * r * r
    if tl_span is None:
        return SectionAreas(disk, 0.0, 0.0)
    if not 0.0 < tl_span < 2.0 * math.pi:
        raise ValueError("tl_span must lie strictly between 0 and 2*pi")
    a1 = -0.5 * tl_span
    a2 = 0.5 * tl_span
    small_is_tl = tl_span <= math.pi
    if small_is_tl:
        start, span = a1, tl_span
    else:
        start, span = a2, 2.0 * math.pi - tl_span
    cone = cone_planes(start, span)
    flap_all = _flap_area_in(r, h, a1, a2, None, math.pi * h * h)
    flap_small = _flap_area_in(r, h, a1, a2, cone, 0.5 * span * h * h)
    # a sector narrower than the flap is all flap; clamp the roundoff residue
    small = max(0.5 * span * r * r - flap_small, 0.0)
    big = disk - 0.5 * span * r * r - (flap_all - flap_small)
    tl, fl = (small, big) if small_is_tl else (big, small)
    half = sum(h * length for length in hole_lengths)
    return SectionAreas(tl + half, fl + half, flap_all - 2.0 * half)


def hole_clear_of_other_flap(r: float, h: float, tl_span: float, t_lo: float,
                             t_hi: float) -> bool:
    """True when the hole rectangle on ray 1 avoids ray 2's strip and the axis disk."""
    a1 = -0.5 * tl_span
    a2 = 0.5 * tl_span
    if t_lo <= h or t_hi >= math.sqrt(max(r * r - h * h, 0.0)):
        return False
    d = _unit(a1)
    n = (-d[1], d[0])
    rect = [
        (t_lo * d[0] - h * n[0], t_lo * d[1] - h * n[1]),
        (t_hi * d[0] - h * n[0], t_hi * d[1] - h * n[1]),
        (t_hi * d[0] + h * n[0], t_hi * d[1] + h * n[1]),
        (t_lo * d[0] + h * n[0], t_lo * d[1] + h * n[1]),
    ]
    overlap = clip_all(rect, half_strip_planes(a2, h, 2.0 * r + 2.0 * h))
    return len(overlap) < 3 or polygon_area(overlap) <= 1e-12
