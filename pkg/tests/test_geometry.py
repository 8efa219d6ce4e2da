import math

import numpy as np
import pytest

from afx.errors import InputError, TopologyError
from afx.geometry import (SectionFrame, VoxelMask, connected_components, distance_transform,
                          extract_centerline, geodesic_distances, label_components,
                          sample_cross_section, surface_voxels)
from afx.geometry.centerline import polyline_to_centerline
from afx.geometry.components import largest_component
from afx.volume_io import LabelVolume
from builders import quarter_torus, tube
from oracles import brute_edt, brute_surface, flood_fill_partition


def partition(bits, connectivity):
    labels, n = label_components(bits, connectivity)
    return {frozenset(map(tuple, np.argwhere(labels == i))) for i in range(1, n + 1)}


# ----------------------------------------------------------- components

@pytest.mark.parametrize("connectivity", [6, 18, 26])
def test_components_match_flood_fill(connectivity):
    rng = np.random.default_rng(connectivity)
    for _ in range(30):
        shape = tuple(rng.integers(1, 10, 3))
        bits = rng.random(shape) < rng.uniform(0.1, 0.6)
        assert partition(bits, connectivity) == flood_fill_partition(bits, connectivity)


def test_components_are_ordered_largest_first():
    bits = np.zeros((9, 3, 3), bool)
    bits[0, 0, 0] = True              # size 1, first
    bits[4:9, 1, 1] = True            # size 5
    bits[2, 2, 2] = True              # size 1, later
    comps = connected_components(VoxelMask(bits, (1, 1, 1)))
    assert [c.count for c in comps] == [5, 1, 1]
    assert comps[1].bits[0, 0, 0]
    assert largest_component(bits).sum() == 5


def test_diagonal_voxels_depend_on_connectivity():
    bits = np.zeros((2, 2, 2), bool)
    bits[0, 0, 0] = bits[1, 1, 1] = True
    assert label_components(bits, 26)[1] == 1
    assert label_components(bits, 18)[1] == 2
    assert label_components(bits, 6)[1] == 2
    with pytest.raises(ValueError):
        label_components(bits, 8)


# ------------------------------------------------------ distance transform

@pytest.mark.parametrize("spacing", [(1.0, 1.0, 1.0), (0.7, 1.3, 2.5), (0.5, 0.5, 3.0)])
def test_distance_transform_equals_brute_force(spacing):
    rng = np.random.default_rng(int(spacing[2] * 10))
    for trial in range(6):
        shape = tuple(rng.integers(2, 17, 3)) if trial else (16, 16, 16)
        bits = rng.random(shape) < rng.uniform(0.5, 0.95)
        got = distance_transform(VoxelMask(bits, spacing))
        assert np.array_equal(got, brute_edt(bits, spacing))


def test_distance_transform_hand_values():
    bits = np.ones((5, 1, 1), bool)
    dt = distance_transform(VoxelMask(bits, (2.0, 1.0, 1.0)))
    # the y/z extent is one voxel, so every voxel is 1 mm from the grid exterior
    assert dt.ravel().tolist() == [1.0] * 5
    bits = np.ones((7, 7, 7), bool)
    dt = distance_transform(VoxelMask(bits, (1, 1, 1)))
    assert dt[3, 3, 3] == 4.0 and dt[0, 0, 0] == 1.0
    assert distance_transform(VoxelMask(np.zeros((3, 3, 3), bool), (1, 1, 1))).max() == 0.0


def test_surface_voxels_match_erosion_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        bits = rng.random(tuple(rng.integers(1, 12, 3))) < 0.7
        assert np.array_equal(surface_voxels(VoxelMask(bits, (1, 1, 1))).bits,
                              brute_surface(bits))


def test_surface_of_a_solid_cube_is_its_shell():
    bits = np.zeros((7, 7, 7), bool)
    bits[1:6, 1:6, 1:6] = True
    s = surface_voxels(VoxelMask(bits, (1, 1, 1)))
    assert s.count == 5 ** 3 - 3 ** 3


# ------------------------------------------------------------ centerline

def test_straight_tube_centerline_length():
    mask, c = tube()
    cl = extract_centerline(mask, (c, c, 0), (c, c, 100))
    assert abs(cl.length - 100.0) <= 0.02 * 100.0
    assert np.allclose(np.abs(cl.tangents[:, 2]), 1.0)
    assert np.allclose(np.diff(cl.arclength), 1.0)


def test_quarter_torus_centerline_length():
    mask, a, b = quarter_torus()
    cl = extract_centerline(mask, a, b)
    expected = 50 * math.pi / 2
    assert abs(cl.length - expected) <= 0.03 * expected
    # the path stays near the tube axis
    rho = np.hypot(cl.points[:, 0] - 2, cl.points[:, 1] - 2)
    assert np.max(np.abs(rho - 50)) < 2.0


def test_single_voxel_line():
    bits = np.zeros((1, 1, 10), bool)
    bits[0, 0, :] = True
    cl = extract_centerline(VoxelMask(bits, (1, 1, 2.0)), (0, 0, 0), (0, 0, 9))
    assert cl.length == pytest.approx(18.0)
    assert cl.arclength[0] == 0.0


def test_centerline_seed_errors():
    mask, c = tube(length=20)
    with pytest.raises(InputError):
        extract_centerline(mask, (0, 0, 0), (c, c, 20))
    with pytest.raises(InputError):
        extract_centerline(mask, (c, c, 5), (c, c, 5))
    bits = mask.bits.copy()
    bits[:, :, 10] = False
    with pytest.raises(TopologyError):
        extract_centerline(VoxelMask(bits, (1, 1, 1)), (c, c, 0), (c, c, 20))


def test_geodesic_distance_along_a_line():
    bits = np.zeros((6, 3, 3), bool)
    bits[:, 1, 1] = True
    d = geodesic_distances(VoxelMask(bits, (1.5, 1, 1)), (0, 1, 1))
    assert d[:, 1, 1].tolist() == pytest.approx([0, 1.5, 3.0, 4.5, 6.0, 7.5])
    assert np.isinf(d[0, 0, 0])


def test_polyline_projection():
    pts = np.column_stack([np.zeros(11), np.zeros(11), np.arange(11.0) * 3])
    cl = polyline_to_centerline(pts, step=1.0)
    assert cl.length == pytest.approx(30.0)
    assert cl.project([5.0, 0.0, 12.3]) == pytest.approx(12.3)
    assert cl.project([0.0, 0.0, -4.0]) == 0.0


# --------------------------------------------------------- cross-sections

def cylinder_volume(r, sp, length=60.0):
    n = int(math.ceil((2 * r + 8) / sp))
    nz = int(length / sp) + 1
    g = np.indices((n, n, nz)).astype(float) * sp
    c = (n - 1) / 2 * sp
    bits = (g[0] - c) ** 2 + (g[1] - c) ** 2 <= r * r
    return LabelVolume(bits.astype(np.uint8), (sp, sp, sp)), np.array([c, c, length / 2])


def section_area(vol, origin, normal, pixel=0.25):
    plane = sample_cross_section(vol, SectionFrame.from_normal(origin, normal), 40.0, pixel)
    return np.count_nonzero(plane == 1) * pixel * pixel


def test_cylinder_section_area():
    vol, o = cylinder_volume(15.0, 1.0)
    area = section_area(vol, o, [0, 0, 1], pixel=0.5)
    assert abs(area / (math.pi * 225) - 1) < 0.05


def test_oblique_section_is_an_ellipse():
    vol, o = cylinder_volume(10.0, 0.5)
    a = math.radians(60)
    area = section_area(vol, o, [math.sin(a), 0, math.cos(a)])
    assert abs(area / (2 * math.pi * 100) - 1) < 0.02   # 1/cos 60 = 2


def test_section_outside_volume_is_background():
    vol, o = cylinder_volume(5.0, 1.0)
    plane = sample_cross_section(vol, SectionFrame.from_normal(o + [0, 0, 500], [0, 0, 1]))
    assert not plane.any()
    assert plane.shape == (160, 160)


def test_section_area_error_shrinks_with_resolution():
    errs = []
    for sp in (2.0, 1.0, 0.5, 0.25):
        vol, o = cylinder_volume(10.0, sp)
        errs.append(abs(section_area(vol, o, [0, 0, 1]) / (math.pi * 100) - 1))
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.005


def test_section_frame_is_orthonormal():
    rng = np.random.default_rng(0)
    for _ in range(50):
        f = SectionFrame.from_normal(np.zeros(3), rng.normal(size=3))
        m = np.array([f.u, f.v, f.normal])
        assert np.allclose(m @ m.T, np.eye(3))
