"""Indirect estimation: per-receiver range-Doppler peaks fused by multilateration."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .model import Estimate, Grid, SceneGeometry, WaveformConfig, doppler_directions, range_bins


@dataclass(frozen=True)
class RangeDopplerMap:
    """Modulus of the zero-padded 2D FFT, Doppler axis centred.

    ``values[i, k]`` corresponds to Doppler ``u_axis[i]`` and range ``r_axis[k]``,
    both in bins.
    """

    values: np.ndarray
    u_axis: np.ndarray
    r_axis: np.ndarray


def range_doppler_map(Y, P_r: int = 1, P_d: int = 1) -> RangeDopplerMap:
    Y = np.asarray(Y)
    Mc, Ms = Y.shape
    n_d, n_r = P_d * Mc, P_r * Ms
    spec = np.fft.fft2(Y, s=(n_d, n_r))
    spec = np.fft.fftshift(spec, axes=0)
    u_axis = (np.arange(n_d) - n_d // 2) / P_d
    r_axis = np.arange(n_r) / P_r
    return RangeDopplerMap(np.abs(spec), u_axis, r_axis)


def extract_peak(rd: RangeDopplerMap) -> tuple[float, float]:
    """``(r_hat, u_hat)`` at the global maximum; ties go to the first row-major index."""
    if rd.values.size == 0:
        raise ValueError("empty range-Doppler map")
    i, k = np.unravel_index(np.argmax(rd.values), rd.values.shape)
    return float(rd.r_axis[k]), float(rd.u_axis[i])


def multilaterate_location(r_hat, grid: Grid, geom: SceneGeometry, cfg: WaveformConfig):
    """Grid bin minimising ``sum_q (S_r_q(x) - r_hat_q)^2``; returns ``(x_hat, residual)``."""
    if len(grid) == 0:
        raise ValueError("empty location grid")
    r_hat = np.asarray(r_hat, dtype=float)
    resid = ((range_bins(geom, cfg, grid.points) - r_hat) ** 2).sum(axis=1)
    best = int(np.argmin(resid))
    return grid.points[best].copy(), float(resid[best])


def multilaterate_velocity(u_hat, x_hat, vgrid: Grid, geom: SceneGeometry, cfg: WaveformConfig):
    """Grid velocity minimising ``sum_q (S_u_q(x_hat, v) - u_hat_q)^2``; returns ``(v_hat, residual)``."""
    if len(vgrid) == 0:
        raise ValueError("empty velocity grid")
    u_hat = np.asarray(u_hat, dtype=float)
    pred = cfg.doppler_scale * vgrid.points @ doppler_directions(geom, x_hat).T
    resid = ((pred - u_hat) ** 2).sum(axis=1)
    best = int(np.argmin(resid))
    return vgrid.points[best].copy(), float(resid[best])


def indirect_estimate(frame, grids, geom: SceneGeometry, cfg: WaveformConfig,
                      P_r: int = 1, P_d: int = 1) -> Estimate:
    """``grids`` is a ``(location_grid, velocity_grid)`` pair."""
    grid, vgrid = grids
    t0 = time.perf_counter_ns()
    peaks = [extract_peak(range_doppler_map(frame[q], P_r, P_d)) for q in range(geom.Q)]
    t1 = time.perf_counter_ns()
    r_hat = [p[0] for p in peaks]
    u_hat = [p[1] for p in peaks]
    x_hat, _ = multilaterate_location(r_hat, grid, geom, cfg)
    v_hat, _ = multilaterate_velocity(u_hat, x_hat, vgrid, geom, cfg)
    t2 = time.perf_counter_ns()
    return Estimate(x_hat, v_hat, {"fft": t1 - t0, "multilateration": t2 - t1})
