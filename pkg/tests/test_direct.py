import numpy as np
import pytest

from gridhop.direct import (
    direct_estimate,
    direct_locate,
    direct_velocity,
    location_decision,
    location_decisions,
    range_correlations,
)
from gridhop.model import Target, WaveformConfig, build_location_grid, build_velocity_grid, range_atom, range_bins
from gridhop.synth import Frame, NoiseSpec, synthesize_frame


def test_decision_at_truth_is_Q_Mc_Ms_squared(geom3):
    cfg = WaveformConfig(Mc=16, Ms=32)
    x = (0.5, 13.0)
    fr = synthesize_frame(cfg, geom3, [Target(x, (1.0, 2.0))])
    assert location_decision(fr, x, geom3, cfg) == pytest.approx(3 * 16 * 32 ** 2, rel=1e-12)


def test_matrix_path_matches_explicit_oracle(geom3, rng):
    cfg = WaveformConfig(Mc=16, Ms=32)
    data = rng.standard_normal((3, 16, 32)) + 1j * rng.standard_normal((3, 16, 32))
    fr = Frame(data)
    pts = rng.uniform((-3, 10), (3, 16), size=(25, 2))
    fast = location_decisions(fr, pts, geom3, cfg)
    slow = np.array([location_decision(fr, p, geom3, cfg) for p in pts])
    np.testing.assert_allclose(fast, slow, rtol=1e-10)


def test_range_correlation_oracle(geom3, rng):
    cfg = WaveformConfig(Mc=8, Ms=16)
    fr = Frame(rng.standard_normal((3, 8, 16)) + 0j)
    x = (1.0, 12.0)
    g = range_correlations(fr, x, geom3, cfg)
    r = range_bins(geom3, cfg, x)[0]
    for q in range(3):
        for m in range(8):
            assert g[q, m] == pytest.approx(np.vdot(range_atom(r[q], 16), fr[q][m]), abs=1e-10)


def test_argmax_invariant_to_frame_scale(geom3, rng):
    cfg = WaveformConfig(Mc=16, Ms=64)
    grid = build_location_grid((-2, 2, 11, 15), cfg, 2)
    fr = synthesize_frame(cfg, geom3, [Target((0.3, 12.9))], NoiseSpec(-10.0, 1))
    x1, _ = direct_locate(fr, grid, geom3, cfg)
    x2, _ = direct_locate(Frame(fr.data * (3 - 4j)), grid, geom3, cfg)
    np.testing.assert_array_equal(x1, x2)


def test_noiseless_grid_truth_recovered(geom3):
    cfg = WaveformConfig()
    grid = build_location_grid((-3, 3, 10, 16), cfg, 2)
    vgrid = build_velocity_grid(5, cfg)
    x, v = grid.points[77], vgrid.points[400]
    fr = synthesize_frame(cfg, geom3, [Target(x, v)])
    est = direct_estimate(fr, (grid, vgrid), geom3, cfg)
    np.testing.assert_array_equal(est.x, x)
    np.testing.assert_array_equal(est.v, v)
    assert set(est.timings) == {"location_scan", "velocity_scan"}
    v2, values = direct_velocity(fr, x, vgrid, geom3, cfg)
    assert values.shape == (len(vgrid),)


@pytest.mark.slow
def test_hit_rate_non_decreasing_in_snr(geom3):
    cfg = WaveformConfig(Mc=32, Ms=64)
    grid = build_location_grid((-2, 2, 11, 15), cfg, 2)
    rates = []
    for snr in (-30.0, -25.0, -20.0, -15.0):
        hits = 0
        for t in range(200):
            rng = np.random.default_rng([t, 99])
            x = rng.uniform((-2, 11), (2, 15))
            fr = synthesize_frame(cfg, geom3, [Target(x, alpha=np.exp(2j * np.pi * rng.random()))],
                                  NoiseSpec(snr, t))
            hits += np.linalg.norm(direct_locate(fr, grid, geom3, cfg)[0] - x) <= 0.5
        rates.append(hits / 200)
    assert all(a <= b + 0.02 for a, b in zip(rates, rates[1:]))
    assert rates[-1] > rates[0] + 0.5
