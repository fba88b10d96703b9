import numpy as np
import pytest

from gridhop.direct import direct_estimate, direct_locate, location_decisions
from gridhop.hopping import (
    fast_time_spectra,
    hop_decisions,
    hop_estimate,
    hop_locate,
    hop_location_decision,
    hop_velocity,
)
from gridhop.interp import HopTable, StaleHopTableError, atom_residual, interp_weights, precompute_hop_table
from gridhop.model import (
    SceneGeometry,
    Target,
    WaveformConfig,
    build_location_grid,
    build_velocity_grid,
    doppler_bins,
    geometry_hash,
    range_atom,
    range_bins,
)
from gridhop.synth import Frame, synthesize_frame

CFG = WaveformConfig()
GEOM = SceneGeometry((0.0, 0.0), [(-12.0, 8.0), (12.0, 10.0), (0.0, 26.0)])


def test_spectra_of_pure_tone():
    Y = np.tile(range_atom(3, 16), (2, 1))[None]
    Z = fast_time_spectra(Y, 1)
    assert np.abs(Z[0, :, 3] - 16).max() < 1e-12
    assert np.abs(np.delete(Z[0], 3, axis=1)).max() < 1e-12
    Z2 = fast_time_spectra(Y, 2)
    assert Z2.shape == (1, 2, 32) and np.argmax(np.abs(Z2[0, 0])) == 6


def test_spectra_match_explicit_products(rng):
    Y = rng.standard_normal((1, 8, 8)) + 1j * rng.standard_normal((1, 8, 8))
    Z = fast_time_spectra(Y, 3)
    ref = np.array([[np.vdot(range_atom(i / 3, 8), Y[0, m]) for i in range(24)] for m in range(8)])
    assert np.abs(Z[0] - ref).max() / np.abs(ref).max() < 1e-9


def _small_scene():
    grid = build_location_grid((-1.5, 1.5, 12, 13.2), CFG, 1)  # 18 bins
    return grid, precompute_hop_table(grid, GEOM, CFG, 4, "poly3")


def test_vectorised_decisions_match_literal(rng):
    grid, table = _small_scene()
    fr = Frame(rng.standard_normal((3, 128, 128)) + 1j * rng.standard_normal((3, 128, 128)))
    Z = fast_time_spectra(fr, 4)
    literal = [hop_location_decision(Z, table, i) for i in range(len(grid))]
    np.testing.assert_allclose(hop_decisions(Z, table), literal, rtol=1e-10)


def test_zero_frame_gives_zero():
    grid, table = _small_scene()
    Z = fast_time_spectra(np.zeros((3, 128, 128), dtype=complex), 4)
    assert np.all(hop_decisions(Z, table) == 0)


def test_18_bin_grid_relative_error():
    grid, table = _small_scene()
    fr = synthesize_frame(CFG, GEOM, [Target(grid.points[7], (1.0, -0.5))])
    hop = hop_decisions(fast_time_spectra(fr, 4), table)
    direct = location_decisions(fr, grid.points, GEOM, CFG)
    assert np.abs(hop - direct).max() / direct.max() <= 1e-2
    assert np.argmax(hop) == np.argmax(direct) == 7


def test_exact_when_ranges_on_fft_grid(rng):
    # a table whose sensed ranges all sit on the oversampled FFT grid
    grid, _ = _small_scene()
    snapped = np.rint(range_bins(GEOM, CFG, grid.points) * 4) / 4
    idx, w = interp_weights(snapped.ravel(), 128, 4, "poly3")
    table = HopTable(idx.reshape(18, 3, 3).astype(np.uint32), w.conj().reshape(18, 3, 3), 4, 128,
                     geometry_hash(GEOM, CFG), grid)
    fr = Frame(rng.standard_normal((3, 128, 128)) + 1j * rng.standard_normal((3, 128, 128)))
    hop = hop_decisions(fast_time_spectra(fr, 4), table)
    for n in range(len(grid)):
        ref = sum(np.sum(np.abs(fr[q] @ range_atom(snapped[n, q], 128).conj()) ** 2) for q in range(3))
        assert hop[n] == pytest.approx(ref, rel=1e-9)


@pytest.mark.slow
def test_error_within_three_times_atom_residual():
    rng = np.random.default_rng(5)
    grid = build_location_grid((-3, 3, 10, 16), CFG, 2)
    table = precompute_hop_table(grid, GEOM, CFG, 4, "poly3")
    sweep = np.linspace(0, 128, 1000, endpoint=False)
    eps = atom_residual(sweep, 128, 4, "poly3").max()
    for _ in range(100):
        x = rng.uniform((-3, 10), (3, 16))
        fr = synthesize_frame(CFG, GEOM, [Target(x, rng.uniform(-5, 5, 2), np.exp(2j * np.pi * rng.random()))])
        hop = hop_decisions(fast_time_spectra(fr, 4), table)
        direct = location_decisions(fr, grid.points, GEOM, CFG)
        assert np.abs(hop - direct).max() / direct.max() <= 3 * eps


@pytest.mark.slow
def test_argmax_agreement_off_grid():
    rng = np.random.default_rng(8)
    grid = build_location_grid((-2, 2, 11, 15), CFG, 2)
    table = precompute_hop_table(grid, GEOM, CFG, 4, "poly3")
    same, n = 0, 500
    for _ in range(n):
        x = rng.uniform((-1.8, 11.2), (1.8, 14.8))
        fr = synthesize_frame(CFG, GEOM, [Target(x, rng.uniform(-5, 5, 2))])
        xh, _, _ = hop_locate(fr, table, GEOM, CFG)
        xd, _ = direct_locate(fr, grid, GEOM, CFG)
        if np.array_equal(xh, xd):
            same += 1
        else:
            assert np.abs(xh - xd).sum() == pytest.approx(grid.spacing)
    assert same / n >= 0.95


def test_hop_estimate_equals_direct_on_grid():
    grid = build_location_grid((-2, 2, 11, 15), CFG, 2)
    vgrid = build_velocity_grid(5, CFG)
    table = precompute_hop_table(grid, GEOM, CFG, 4, "poly3")
    for i, k in [(10, 300), (45, 0), (60, 620)]:
        fr = synthesize_frame(CFG, GEOM, [Target(grid.points[i], vgrid.points[k])])
        h = hop_estimate(fr, table, vgrid, GEOM, CFG, 4)
        d = direct_estimate(fr, (grid, vgrid), GEOM, CFG)
        np.testing.assert_array_equal(h.x, d.x)
        np.testing.assert_array_equal(h.v, d.v)
        assert set(h.timings) == {"fft", "hop_scan", "velocity"}


def test_velocity_zero_and_refinement():
    vgrid = build_velocity_grid(5, CFG)
    x = np.array([0.4, 13.1])
    fr = synthesize_frame(CFG, GEOM, [Target(x)])
    v0, _ = hop_velocity(fr, x, vgrid, GEOM, CFG, 1)
    assert np.all(v0 == 0)
    u = doppler_bins(GEOM, CFG, x, vgrid.points)
    err1 = np.abs(u - np.rint(u))
    err4 = np.abs(u - np.rint(u * 4) / 4)
    assert np.all(err4 <= err1 + 1e-12)


def test_stale_table_is_hard_error():
    grid, table = _small_scene()
    other = SceneGeometry((0.0, 0.0), [(-12.0, 8.0), (12.0, 10.0), (0.0, 27.0)])
    fr = synthesize_frame(CFG, other, [Target((0, 12.5))])
    with pytest.raises(StaleHopTableError, match="stale"):
        hop_locate(fr, table)
    with pytest.raises(StaleHopTableError):
        hop_locate(Frame(fr.data), table, other, CFG)
