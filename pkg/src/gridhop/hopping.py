"""Grid hopping: the direct decision function approximated from FFT outputs."""

from __future__ import annotations

import time

import numpy as np

from .direct import range_correlations
from .interp import HopTable, StaleHopTableError
from .model import Estimate, Grid, SceneGeometry, WaveformConfig, doppler_bins


def fast_time_spectra(frame, P_r: int = 1) -> np.ndarray:
    """Zero-padded FFT of every chirp, shape ``(Q, Mc, P_r * Ms)``.

    ``Z[q, mc, i] = <Y_q[mc], a(i / P_r)>``.
    """
    data = frame.data if hasattr(frame, "data") else np.asarray(frame)
    return np.fft.fft(data, n=P_r * data.shape[-1], axis=-1)


def hop_location_decision(Z, table: HopTable, i: int) -> float:
    """``sum_q sum_mc |c(i,q)^T Z_q[mc, I(i,q)]|^2`` for a single bin."""
    total = 0.0
    for q in range(table.Q):
        approx = Z[q][:, table.indices[i, q]] @ table.coeffs[i, q]
        total += float(np.sum(approx.real ** 2 + approx.imag ** 2))
    return total


def hop_decisions(Z, table: HopTable) -> np.ndarray:
    """``hop_location_decision`` for every bin at once.

    Sums over chirps first: for each lag the table uses, the chirp-summed
    cross-spectrum ``R_lag[a] = sum_mc Z[mc, a] conj(Z[mc, a + lag])`` is formed
    once, after which each bin costs ``Q * K^2`` lookups.
    """
    lags, slots, weights = table.lag_plan
    first = table.indices.astype(np.int64)[..., :, None]
    first = np.broadcast_to(first, slots.shape)
    L = Z.shape[-1]
    signed = np.where(lags > L // 2, lags - L, lags)
    pad = int(np.abs(signed).max())
    values = np.zeros(table.n_bins)
    for q in range(table.Q):
        Zt = np.ascontiguousarray(Z[q].T)
        Zc = Zt.conj()
        if pad:
            Zc = np.concatenate([Zc[L - pad:], Zc, Zc[:pad]])
        cross = np.stack([np.einsum("am,am->a", Zt, Zc[pad + s:pad + s + L]) for s in signed])
        terms = weights[:, q] * cross[slots[:, q], first[:, q]]
        values += terms.sum(axis=(1, 2)).real
    return values


def _check_binding(frame, table, geom, cfg):
    frame_hash = getattr(frame, "geometry_hash", None)
    if frame_hash is not None and frame_hash != table.geometry_hash:
        raise StaleHopTableError(
            f"stale hop table: built for scene hash {table.geometry_hash:#018x}, frame has {frame_hash:#018x}"
        )
    if geom is not None and cfg is not None:
        table.check(geom, cfg)
    if table.grid is None:
        raise StaleHopTableError("hop table carries no location grid; load it with the grid it was built on")


def hop_locate(frame, table: HopTable, geom: SceneGeometry | None = None, cfg: WaveformConfig | None = None):
    """Returns ``(x_hat, decision_values, timings)``; table construction is not timed."""
    _check_binding(frame, table, geom, cfg)
    t0 = time.perf_counter_ns()
    Z = fast_time_spectra(frame, table.oversample)
    t1 = time.perf_counter_ns()
    values = hop_decisions(Z, table)
    best = int(np.argmax(values))
    t2 = time.perf_counter_ns()
    return table.grid.points[best].copy(), values, {"fft": t1 - t0, "hop_scan": t2 - t1}


def hop_velocity(frame, x_hat, vgrid: Grid, geom: SceneGeometry, cfg: WaveformConfig, P_d: int = 4):
    """Velocity from single-index Doppler hopping; returns ``(v_hat, decision_values)``.

    The range correlation at ``x_hat`` is exact; its Doppler FFT is then read at
    the nearest oversampled bin for every candidate velocity.  Candidates that
    read the same bins tie exactly; among those the one whose predicted Doppler
    lies closest to the bin centres wins, then the lowest index.
    """
    if len(vgrid) == 0:
        raise ValueError("empty velocity grid")
    g = range_correlations(frame, x_hat, geom, cfg)
    L = P_d * cfg.Mc
    G = np.fft.fft(g, n=L, axis=1)
    u = doppler_bins(geom, cfg, x_hat, vgrid.points)
    k = np.mod(np.rint(u * P_d).astype(np.int64), L)
    picked = G[np.arange(geom.Q)[None, :], k]
    values = (picked.real ** 2 + picked.imag ** 2).sum(axis=1)
    tied = np.flatnonzero(values == values.max())
    quant = ((u[tied] * P_d - np.rint(u[tied] * P_d)) ** 2).sum(axis=1)
    best = tied[int(np.argmin(quant))]
    return vgrid.points[best].copy(), values


def hop_estimate(frame, table: HopTable, vgrid: Grid, geom: SceneGeometry, cfg: WaveformConfig,
                 P_d: int = 4) -> Estimate:
    x_hat, _, timings = hop_locate(frame, table, geom, cfg)
    t0 = time.perf_counter_ns()
    v_hat, _ = hop_velocity(frame, x_hat, vgrid, geom, cfg, P_d)
    timings["velocity"] = time.perf_counter_ns() - t0
    return Estimate(x_hat, v_hat, timings)
