"""Deterministic pseudo-random phantom families.

Each case targets a minimum true-lumen fraction drawn from strata spanning
[5, 92] %.  The true-lumen span is constant except for an optional pinch: a
6 mm plateau at the target with linear ramps back to the base span.  Tears
and branches are placed on segments where the flap is not moving, so every
tear in a case has the same orientation relative to the voxel grid.

Cases are rejected and redrawn when a truth value lands too close to a
decision threshold for a voxel pipeline to call it reliably (see the
``*_GUARD`` constants); the thresholds themselves are never moved.
"""
from __future__ import annotations

import math

import numpy as np

from afx.errors import SpecError
from afx.phantom.areas import section_areas
from afx.phantom.generate import (FLAR_RISK_PCT, TLC_WARN_PCT, compute_truth,
                                  truth_zone_boundaries)
from afx.phantom.spec import (FLAP_HALF_WIDTH_FACTOR, BranchSpec, FlapSpec, PhantomSpec,
                              TearSpec, Trajectory)
from afx.volume_io import VoxelSpacing

TLC_TARGETS = (5.0, 92.0)
NO_PINCH_ABOVE = 80.0
RAMP_DEG_PER_MM = 10.0      # true-lumen span change along the axis
PLATEAU_MM = 6.0
PCT_GUARD = 2.0             # truth kept this far from the TLC/FLAR cutoffs
ZONE_GUARD_MM = 4.0         # tears kept this far from zone boundaries
DESC_GUARD_MM = 3.0
RATIO_GUARD = (0.3, 0.8)    # tear area ratios avoid the significance cutoff

ARCH_BRANCHES = (
    ("brachiocephalic_trunk", 0, 0.25),
    ("left_common_carotid", 1, 0.45),
    ("left_subclavian", 2, 0.65),
)
VISCERAL_BRANCHES = (
    ("celiac_trunk", 5),
    ("superior_mesenteric", 6),
    ("left_renal", 7),
)
ARCH_WINDOW_DEG = (110, 250)
VISCERAL_WINDOW_DEG = (100, 260)


class _Redraw(Exception):
    pass


def solve_span(r: float, h: float, tlc_pct: float) -> float:
    """True-lumen span (degrees) giving ``tlc_pct`` in a section of radius ``r``."""
    lo, hi = 0.5, 359.5
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if section_areas(r, h, math.radians(mid)).tlc_pct < tlc_pct:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _stratified_targets(n: int, rng) -> list[float]:
    lo, hi = TLC_TARGETS
    t = lo + (hi - lo) * (np.arange(n) + rng.random(n)) / n
    t[0] = rng.uniform(5.0, 7.0)   # guarantees one severe-collapse case
    out = []
    for x in t:
        if abs(x - TLC_WARN_PCT) < PCT_GUARD + 0.5:
            x = TLC_WARN_PCT - 2.5 if x < TLC_WARN_PCT else TLC_WARN_PCT + 2.5
        out.append(float(x))
    return out


def _free(grid: np.ndarray, blocked) -> np.ndarray:
    ok = np.ones(grid.size, dtype=bool)
    for lo, hi in blocked:
        ok &= (grid < lo) | (grid > hi)
    return ok


def _pick_branch(rng, probe: PhantomSpec, name, territory, zone, ostium, window):
    radius = float(rng.uniform(3.5, 5.0) if territory == "arch" else rng.uniform(3.0, 4.5))
    length = float(rng.uniform(22.0, 32.0))
    into = bool(rng.random() < 0.3)
    supplies = list(rng.permutation(["TL", "FL", "both"]))
    angles = np.arange(window[0], window[1] + 1, 1.0)
    for supply in supplies:
        ok = []
        for a in angles:
            b = BranchSpec(name, territory, ostium, float(a), radius, length, supply, into, zone)
            if probe.branch_supply_consistent(b):
                ok.append(b)
        if ok:
            return ok[int(rng.integers(len(ok)))]
    raise _Redraw(f"no direction for {name}")


def _tear_diameters(rng, k: int, cap: float) -> list[float]:
    for _ in range(100):
        d = [float(x) for x in np.round(rng.uniform(5.0, cap, k), 1)]
        big = max(x * x for x in d)
        ratios = [x * x / big for x in d]
        if all(q <= RATIO_GUARD[0] or q >= RATIO_GUARD[1] for q in ratios):
            return d
    raise _Redraw("tear diameters")


def _draw_case(rng, target: float, distal_pinch: bool, name: str) -> PhantomSpec:
    candy = bool(rng.random() < 0.6)
    r0 = float(rng.uniform(10.0, 14.0))
    r1 = r0 - float(rng.uniform(0.5, 1.5)) if rng.random() < 0.3 else r0
    if candy:
        traj = Trajectory("candy-cane", ascending=float(rng.uniform(40, 55)),
                          arc_radius=float(rng.uniform(28, 36)),
                          descending=float(rng.uniform(100, 140)))
    else:
        traj = Trajectory("straight", length=float(rng.uniform(90, 140)))
    total = traj.total_length
    radius = ((0.0, r0), (total, r1))
    theta = float(rng.uniform(0.0, 360.0))
    pinch = target < NO_PINCH_ABOVE
    rate = math.radians(0.5 * RAMP_DEG_PER_MM) if pinch else 0.0
    h = FLAP_HALF_WIDTH_FACTOR * math.sqrt(1.0 + (r0 * rate) ** 2)
    r_mid = 0.5 * (r0 + r1)
    if pinch:
        base_tlc = float(rng.uniform(max(target + 10.0, 35.0), 92.0))
        w_base = solve_span(r_mid, h, base_tlc)
    else:
        w_base = solve_span(r_mid, h, target)

    def flap(span_knots):
        return FlapSpec(((0.0, theta), (total, theta)), span_knots, half_width=h)

    probe = PhantomSpec(VoxelSpacing(1.0, 1.0, 1.0), traj, radius,
                        flap=flap(((0.0, w_base), (total, w_base))))

    branches = []
    if candy:
        a0, a1 = traj.arc_range
        for bname, zone, frac in ARCH_BRANCHES:
            s = a0 + frac * (a1 - a0)
            branches.append(_pick_branch(rng, probe, bname, "arch", zone, s, ARCH_WINDOW_DEG))
        v_lo, v_hi = a1 + 25.0, total - 30.0
        n_visceral = int(rng.integers(0, 3))
    else:
        v_lo, v_hi = 25.0, total - 25.0
        n_visceral = int(rng.integers(0, 4))
    if n_visceral:
        which = sorted(rng.choice(len(VISCERAL_BRANCHES), n_visceral, replace=False))
        pos = np.sort(rng.uniform(v_lo, v_hi, n_visceral))
        if np.any(np.diff(pos) < 20.0):
            raise _Redraw("visceral branches too close")
        for i, s in zip(which, pos):
            bname, zone = VISCERAL_BRANCHES[i]
            branches.append(_pick_branch(rng, probe, bname, "visceral", zone, float(s),
                                         VISCERAL_WINDOW_DEG))
    blocked = [(b.ostium - b.radius - 6.0, b.ostium + b.radius + 6.0) for b in branches]
    if candy:
        blocked.append((traj.arc_range[0] - 5.0, traj.arc_range[1] + 5.0))

    grid = np.arange(0.0, total, 0.5)
    span_knots = ((0.0, w_base), (total, w_base))
    footprint = None
    if pinch:
        w_pinch = solve_span(r_mid, h, target)
        ramp = (w_base - w_pinch) / RAMP_DEG_PER_MM
        half = 0.5 * PLATEAU_MM + ramp
        ok = _free(grid, [(lo - half, hi + half) for lo, hi in blocked])
        ok &= (grid >= 15.0 + half) & (grid <= total - 15.0 - half)
        if distal_pinch and candy:
            ok &= grid >= traj.arc_range[1] + 5.0 + half
        if not ok.any():
            raise _Redraw("no room for the pinch")
        sp_ = float(rng.choice(grid[ok]))
        p = 0.5 * PLATEAU_MM
        span_knots = ((0.0, w_base), (sp_ - half, w_base), (sp_ - p, w_pinch),
                      (sp_ + p, w_pinch), (sp_ + half, w_base), (total, w_base))
        footprint = (sp_ - half, sp_ + half)
        blocked.append(footprint)

    k = int(rng.choice(4, p=[0.2, 0.35, 0.3, 0.15]))
    tears = []
    if k:
        cap = min(10.0, r1 - 3.0)
        diam = _tear_diameters(rng, k, cap)
        if candy:
            a0, a1 = traj.arc_range
            zone_ok = ((grid >= 12.0) & (grid <= a0 - 8.0)) | ((grid >= a1 + 8.0) & (grid <= total - 15.0))
        else:
            zone_ok = (grid >= 15.0) & (grid <= total - 15.0)
        for d in diam:
            taken = [(t.arclength - 0.5 * t.diameter - 10.0 - 0.5 * d,
                      t.arclength + 0.5 * t.diameter + 10.0 + 0.5 * d) for t in tears]
            ok = zone_ok & _free(grid, [(lo - 0.5 * d, hi + 0.5 * d) for lo, hi in blocked] + taken)
            if not ok.any():
                raise _Redraw("no room for a tear")
            tears.append(TearSpec(float(rng.choice(grid[ok])), d))
        tears.sort(key=lambda t: t.arclength)

    spec = PhantomSpec(
        spacing=VoxelSpacing(1.0, 1.0, 1.0),
        trajectory=traj,
        radius=radius,
        flap=flap(span_knots),
        tears=tuple(tears),
        branches=tuple(branches),
        wall_thickness=1.5 if rng.random() < 0.3 else 0.0,
        seed=int(rng.integers(2 ** 31)),
        name=name,
    )
    try:
        spec.validate()
    except SpecError as exc:
        raise _Redraw(str(exc)) from exc
    _check_guards(spec, footprint)
    return spec


def _check_guards(spec: PhantomSpec, footprint) -> None:
    # Cheap geometric checks first; the dense-grid truth only for survivors.
    anchors = {}
    for b in spec.branches:
        anchors[b.expected_zone] = max(anchors.get(b.expected_zone, -np.inf), b.ostium)
    bounds = truth_zone_boundaries(anchors, spec.length)
    desc = bounds[3] if bounds is not None else 0.0
    if footprint is not None:
        lo, hi = footprint
        if lo - DESC_GUARD_MM <= desc <= hi + DESC_GUARD_MM:
            raise _Redraw("descending start inside the pinch ramps")
    if bounds is not None:
        for t in spec.tears:
            if min(abs(t.arclength - b) for b in bounds) < ZONE_GUARD_MM:
                raise _Redraw("tear on a zone boundary")
    if spec.tears:
        big = max(t.area for t in spec.tears)
        for t in spec.tears:
            if RATIO_GUARD[0] < t.area / big < RATIO_GUARD[1]:
                raise _Redraw("tear area ratio near the significance cutoff")
    truth = compute_truth(spec)
    if abs(truth.min_tlc_pct - TLC_WARN_PCT) < PCT_GUARD:
        raise _Redraw("min TLC near the warning cutoff")
    if abs(truth.max_flar_pct - FLAR_RISK_PCT) < PCT_GUARD:
        raise _Redraw("max FLAR near the risk cutoff")


def sample_suite(n: int, seed: int = 0, max_attempts: int = 400) -> list[PhantomSpec]:
    """``n`` deterministic phantom specs spanning the TLC/FLAR, tear and branch ranges."""
    if n < 1:
        raise ValueError("n must be >= 1")
    targets = _stratified_targets(n, np.random.default_rng(seed))
    specs = []
    for i, target in enumerate(targets):
        rng = np.random.default_rng([seed, i])
        for attempt in range(max_attempts):
            if attempt and attempt % 40 == 0:
                target = float(np.clip(target + rng.normal(0.0, 3.0), *TLC_TARGETS))
            try:
                specs.append(_draw_case(rng, target, i == 0, f"suite-{seed}-{i:03d}"))
                break
            except _Redraw:
                continue
        else:
            raise RuntimeError(f"could not draw suite case {i} (seed {seed})")
    return specs
