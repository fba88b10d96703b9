"""Synthetic measurement frames from the rank-one FMCW signal model."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import (
    SceneGeometry,
    Target,
    WaveformConfig,
    doppler_bins,
    doppler_atom,
    geometry_hash,
    range_atom,
    range_bins,
)


class AliasingError(ValueError):
    """Sensed parameters fall outside the unambiguous FFT window."""


@dataclass(frozen=True)
class Frame:
    """Q complex matrices, stacked as ``data[q]`` with shape ``(Mc, Ms)``.

    Rows are chirps (slow time), columns are samples within a chirp (fast time).
    ``geometry_hash`` ties the frame to the scene it was recorded in, when known.
    """

    data: np.ndarray
    geometry_hash: int | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 3:
            raise ValueError(f"frame data must be (Q, Mc, Ms), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("frame contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def Q(self) -> int:
        return self.data.shape[0]

    @property
    def Mc(self) -> int:
        return self.data.shape[1]

    @property
    def Ms(self) -> int:
        return self.data.shape[2]

    def __getitem__(self, q):
        return self.data[q]

    def __len__(self):
        return self.Q


@dataclass(frozen=True)
class NoiseSpec:
    """Per-entry SNR in dB against ``|alpha_ref|^2``; ``snr_db=None`` is noiseless."""

    snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.snr_db is not None:
            if not np.isfinite(self.snr_db):
                raise ValueError(f"snr_db must be finite or None, got {self.snr_db!r}")
            object.__setattr__(self, "snr_db", float(self.snr_db))

    @property
    def noiseless(self) -> bool:
        return self.snr_db is None


NOISELESS = NoiseSpec(None)


def _check_alias(r, u, cfg):
    if np.any(r < 0) or np.any(r >= cfg.Ms) or np.any(u < -cfg.Mc / 2) or np.any(u >= cfg.Mc / 2):
        raise AliasingError(
            f"scene outside unambiguous window: r={np.round(r, 3).tolist()} must lie in [0, {cfg.Ms}), "
            f"u={np.round(u, 3).tolist()} in [{-cfg.Mc / 2}, {cfg.Mc / 2})"
        )


def synthesize_frame(cfg: WaveformConfig, geom: SceneGeometry, targets, noise: NoiseSpec = NOISELESS,
                     gains=None) -> Frame:
    """Sum of ``alpha * b(u_q) (x) a(r_q)`` over targets, plus noise.

    ``gains`` optionally scales each receiver's contribution by a complex factor
    (per-receiver scattering or path loss); unity by default.
    """
    targets = list(targets)
    gains = np.ones(geom.Q, dtype=complex) if gains is None else np.asarray(gains, dtype=complex)
    if gains.shape != (geom.Q,):
        raise ValueError(f"gains must have length Q={geom.Q}")
    data = np.zeros((geom.Q, cfg.Mc, cfg.Ms), dtype=complex)
    for t in targets:
        r = range_bins(geom, cfg, t.x)[0]
        u = doppler_bins(geom, cfg, t.x, t.v)[0]
        _check_alias(r, u, cfg)
        for q in range(geom.Q):
            data[q] += t.alpha * gains[q] * np.outer(doppler_atom(u[q], cfg.Mc), range_atom(r[q], cfg.Ms))
    frame = Frame(data, geometry_hash(geom, cfg))
    alpha_ref = targets[0].alpha if targets else 1.0
    return add_noise(frame, noise, alpha_ref)


def add_noise(frame: Frame, noise: NoiseSpec, alpha_ref: complex = 1.0) -> Frame:
    """Add i.i.d. circular complex Gaussian noise of variance ``|alpha_ref|^2 10^(-snr/10)``.

    Each receiver draws from its own child stream of ``noise.seed`` so the
    result does not depend on the order receivers are processed in.
    """
    if noise.noiseless:
        return frame
    sigma2 = abs(alpha_ref) ** 2 * 10.0 ** (-noise.snr_db / 10.0)
    scale = np.sqrt(sigma2 / 2.0)
    streams = np.random.SeedSequence(noise.seed).spawn(frame.Q)
    out = frame.data.copy()
    for q, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        w = rng.standard_normal((2, frame.Mc, frame.Ms))
        out[q] += scale * (w[0] + 1j * w[1])
    return replace(frame, data=out)


def on_bin_geometry(cfg: WaveformConfig, tx, x, v, n_rx: int, rng, rx_range=(4.0, 20.0),
                    max_tries: int = 1000) -> SceneGeometry:
    """Receivers placed so every sensed range and Doppler of ``(x, v)`` is an integer bin.

    Each receiver sits at a distance making the summed path a whole number of
    range bins, in a direction making the bistatic Doppler a whole number of
    Doppler bins.  Placements with nearly parallel Doppler directions (velocity
    not identifiable) or receivers within 1 m of each other are redrawn.
    """
    tx = np.asarray(tx, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    d_tx = np.linalg.norm(x - tx)
    if d_tx <= 0:
        raise ValueError("target coincides with the transmitter")
    e_tx = (x - tx) / d_tx
    speed = np.linalg.norm(v)
    s_tx = e_tx @ v
    K = cfg.doppler_scale
    bin_len = 1.0 / cfg.range_scale
    n_lo = int(np.ceil((d_tx + rx_range[0]) / bin_len))
    n_hi = min(int(np.floor((d_tx + rx_range[1]) / bin_len)), cfg.Ms - 1)
    if n_hi < n_lo:
        raise ValueError("no whole-bin receiver distance fits the requested range")
    if speed > 0:
        u_lo = max(int(np.floor(K * (s_tx - speed))) + 1, -(cfg.Mc // 2))
        u_hi = min(int(np.ceil(K * (s_tx + speed))) - 1, (cfg.Mc - 1) // 2)
        if u_hi < u_lo:
            raise ValueError("speed too low for a whole-bin Doppler placement")
        v_hat = v / speed
        v_perp = np.array([-v_hat[1], v_hat[0]])
    for _ in range(max_tries):
        rx = []
        for _q in range(n_rx):
            d_rx = rng.integers(n_lo, n_hi + 1) * bin_len - d_tx
            if speed > 0:
                u = rng.integers(u_lo, u_hi + 1)
                cos_phi = np.clip((u / K - s_tx) / speed, -1.0, 1.0)
                sin_phi = np.sqrt(1.0 - cos_phi ** 2) * rng.choice((-1.0, 1.0))
                e_rx = cos_phi * v_hat + sin_phi * v_perp
            else:
                phi = rng.uniform(0, 2 * np.pi)
                e_rx = np.array([np.cos(phi), np.sin(phi)])
            rx.append(x - d_rx * e_rx)
        rx = np.array(rx)
        pts = np.vstack([tx, rx])
        gaps = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1) + 10.0 * np.eye(len(pts))
        if gaps.min() < 1.0:
            continue
        dirs = e_tx + (x - rx) / np.linalg.norm(x - rx, axis=1)[:, None]
        if np.linalg.svd(dirs, compute_uv=False).min() < 0.3:
            continue
        return SceneGeometry(tx, rx)
    raise ValueError("could not place receivers on whole bins")
