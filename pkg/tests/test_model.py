import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridhop.model import (
    DegenerateGeometryError,
    SceneGeometry,
    Target,
    WaveformConfig,
    atom_matrix,
    build_location_grid,
    build_velocity_grid,
    doppler_atom,
    geometry_hash,
    range_atom,
    range_sensing,
    speed_sensing,
)

CFG3 = WaveformConfig(c=3e8)
finite = st.floats(-50, 50, allow_nan=False)


def test_range_sensing_hand_example():
    geom = SceneGeometry((0, 0), [(6, 0), (0, 9)])
    # distances 5 + 5 = 10 m, 250e6 / 3e8 bins per metre
    assert range_sensing(geom, CFG3, 0, (3, 4)) == pytest.approx(10 * 250e6 / 3e8, rel=1e-15)
    assert range_sensing(geom, CFG3, 0, (3, 4)) == pytest.approx(8.333333333333334)


def test_one_range_bin_is_c_over_B_of_summed_path():
    geom = SceneGeometry((0, 0), [(1.2, 0), (0, 5)])
    # any point on the TX-RX segment has summed path 1.2 m = c / B
    assert range_sensing(geom, CFG3, 0, (0.4, 0)) == pytest.approx(1.0, abs=1e-15)


def test_speed_sensing_hand_example():
    geom = SceneGeometry((0, 0), [(0, 0.001), (5, 5)])
    u = speed_sensing(geom, CFG3, 0, (100, 0), (10, 0))
    assert u == pytest.approx(24e9 * 1.28e-4 * 128 * 20 / 3e8, rel=1e-6)
    assert u == pytest.approx(26.21, abs=0.01)


def test_speed_sensing_zero_and_broadside():
    geom = SceneGeometry((-5, 0), [(5, 0), (0, -7)])
    assert speed_sensing(geom, CFG3, 0, (1, 2), (0, 0)) == 0.0
    # target on the perpendicular bisector, moving parallel to the baseline
    assert speed_sensing(geom, CFG3, 0, (0, 10), (3, 0)) == pytest.approx(0.0, abs=1e-12)


def test_degenerate_locations_rejected():
    geom = SceneGeometry((0, 0), [(6, 0), (0, 9)])
    with pytest.raises(DegenerateGeometryError):
        range_sensing(geom, CFG3, 0, (0, 0))
    with pytest.raises(DegenerateGeometryError):
        speed_sensing(geom, CFG3, 0, (6, 0), (1, 1))
    with pytest.raises(IndexError):
        range_sensing(geom, CFG3, 2, (1, 1))


@pytest.mark.parametrize("tx, rx", [
    ((0, 0), [(0, 0), (1, 1)]),
    ((0, 0), [(1, 1), (1, 1)]),
])
def test_degenerate_geometry_rejected(tx, rx):
    with pytest.raises(DegenerateGeometryError):
        SceneGeometry(tx, rx)


def test_geometry_needs_two_receivers():
    with pytest.raises(ValueError):
        SceneGeometry((0, 0), [(1, 1)])


@pytest.mark.parametrize("kw", [{"B": 0}, {"f0": -1}, {"Mc": 1}, {"Ms": 1.5}, {"c": float("inf")}])
def test_waveform_validation(kw):
    with pytest.raises(ValueError):
        WaveformConfig(**kw)


def test_range_atom_examples():
    np.testing.assert_array_equal(range_atom(0, 4), np.ones(4))
    np.testing.assert_allclose(range_atom(1, 4), [1, 1j, -1, -1j], atol=1e-15)
    for i in range(8):
        for k in range(8):
            if i != k:
                assert abs(np.vdot(range_atom(i, 8), range_atom(k, 8))) < 1e-12


def test_doppler_atom_examples():
    np.testing.assert_array_equal(doppler_atom(0, 3), np.ones(3))
    np.testing.assert_allclose(doppler_atom(2, 4), [1, -1, 1, -1], atol=1e-15)


@given(st.floats(-1e3, 1e3, allow_nan=False), st.integers(1, 300))
def test_atom_norm_and_periodicity(r, M):
    a = range_atom(r, M)
    assert np.linalg.norm(a) ** 2 == pytest.approx(M, rel=1e-12)
    np.testing.assert_allclose(range_atom(r + M, M), a, atol=1e-9)
    assert np.linalg.norm(doppler_atom(r, M)) ** 2 == pytest.approx(M, rel=1e-12)


def test_atom_matrix_recurrence_matches_exponential():
    rng = np.random.default_rng(3)
    r = rng.uniform(-64, 128, 50)
    M = 2500  # crosses two re-seeding points
    exact = np.exp(2j * np.pi * np.outer(r, np.arange(M)) / M)
    assert np.abs(atom_matrix(r, M) - exact).max() < 1e-10


@given(finite, finite, finite, finite, st.floats(-10, 10))
@settings(max_examples=60)
def test_speed_sensing_linear_in_velocity(x0, x1, v0, v1, lam):
    geom = SceneGeometry((-60, -60), [(70, -60), (-60, 75)])
    x = (x0, x1)
    base = speed_sensing(geom, CFG3, 1, x, (v0, v1))
    scaled = speed_sensing(geom, CFG3, 1, x, (lam * v0, lam * v1))
    assert scaled == pytest.approx(lam * base, rel=1e-9, abs=1e-9)


@given(finite, finite)
@settings(max_examples=60)
def test_range_sensing_triangle_bound(x0, x1):
    geom = SceneGeometry((-60, -60), [(70, -60), (-60, 75)])
    for q in range(geom.Q):
        floor = CFG3.range_scale * np.linalg.norm(geom.tx - geom.rx[q])
        assert range_sensing(geom, CFG3, q, (x0, x1)) >= floor * (1 - 1e-12)


def test_location_grid_resolution_and_count():
    grid = build_location_grid((0, 3, 0, 1.2), CFG3, 1)
    assert grid.spacing == pytest.approx(0.6, abs=1e-16)
    assert grid.shape == (6, 3) and len(grid) == 18
    assert build_location_grid((0, 3, 0, 1.2), CFG3, 2).spacing == pytest.approx(0.3, abs=1e-16)
    assert round(build_location_grid((0, 1, 0, 1), WaveformConfig(), 1).spacing, 4) == 0.5996


@pytest.mark.parametrize("d", [0.5, 1, 2, 3, 4, 7])
def test_location_grid_spacing_times_density_is_resolution(d):
    cfg = WaveformConfig()
    grid = build_location_grid((-5, 5, 0, 10), cfg, d)
    assert abs(grid.spacing * d - cfg.range_resolution) <= math.ulp(cfg.range_resolution)
    pts = grid.points
    xmin, xmax, ymin, ymax = grid.extents
    assert np.all((pts[:, 0] >= xmin) & (pts[:, 0] <= xmax) & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax))
    np.testing.assert_allclose(np.diff(grid.xs), grid.spacing, rtol=1e-12)


def test_location_grid_errors():
    with pytest.raises(ValueError):
        build_location_grid((0, 1, 0, 1), CFG3, 0)
    with pytest.raises(ValueError):
        build_location_grid((1, 0, 0, 1), CFG3, 1)


def test_velocity_grid_example():
    vg = build_velocity_grid(15, CFG3, 1)
    assert vg.spacing == pytest.approx(3e8 / (2 * 24e9 * 1.28e-4 * 128), rel=1e-15)
    assert vg.spacing == pytest.approx(0.3815, abs=1e-4)
    assert vg.shape == (79, 79)
    assert np.any(np.all(vg.points == 0, axis=1))
    vg2 = build_velocity_grid(15, CFG3, 2)
    assert vg2.spacing == pytest.approx(vg.spacing / 2)
    assert 3.9 < len(vg2) / len(vg) < 4.1


def test_grid_points_are_x_major():
    grid = build_location_grid((0, 1.2, 0, 0.6), CFG3, 1)
    np.testing.assert_allclose(grid.points, [[0, 0], [0, 0.6], [0.6, 0], [0.6, 0.6], [1.2, 0], [1.2, 0.6]])


def test_geometry_hash_is_sensitive():
    geom = SceneGeometry((0, 0), [(6, 0), (0, 9)])
    h = geometry_hash(geom, CFG3)
    assert h == geometry_hash(SceneGeometry((0, 0), [(6, 0), (0, 9)]), CFG3)
    assert h != geometry_hash(SceneGeometry((0, 0), [(6, 0), (0, 9.0001)]), CFG3)
    assert h != geometry_hash(geom, WaveformConfig())
    assert 0 <= h < 2 ** 64


def test_target_coerces_fields():
    t = Target((1, 2))
    assert t.v.tolist() == [0.0, 0.0] and t.alpha == 1 + 0j
    with pytest.raises(ValueError):
        Target((np.nan, 0))
