"""Domain types, sensing functions and atoms for a multistatic FMCW radar.

Sensed parameters are expressed in FFT-bin units:

* range ``r = (B / c) * (|x - x_tx| + |x - x_rx|)``, so one bin is ``c / B``
  metres of summed path (``c / 2B`` monostatic-equivalent range);
* Doppler ``u = (f0 * Tc * Mc / c) * <e_tx + e_rx, v>``, with ``e_*`` the unit
  vectors pointing from the antenna to the target.

Atoms carry the matching ``1/Ms`` and ``1/Mc`` phase divisors so integer
sensed parameters land exactly on FFT bins.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SPEED_OF_LIGHT = 299792458.0

# Distance below which a location counts as coincident with an antenna.
_COINCIDENT_TOL = 1e-9

# Atom recurrences are re-seeded from the exact exponential this often.
RENORM_PERIOD = 1024


class DegenerateGeometryError(ValueError):
    """A location coincides with an antenna, or antennas coincide."""


@dataclass(frozen=True)
class WaveformConfig:
    f0: float = 24e9
    B: float = 250e6
    Tc: float = 128e-6
    Mc: int = 128
    Ms: int = 128
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("f0", "B", "Tc", "c"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and positive, got {val!r}")
        for name in ("Mc", "Ms"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 2:
                raise ValueError(f"{name} must be an integer >= 2, got {getattr(self, name)!r}")
        if not (np.isfinite(self.range_resolution) and self.range_resolution > 0):
            raise ValueError("range resolution c/(2B) is not finite and positive")

    @property
    def range_resolution(self) -> float:
        """Monostatic-equivalent range resolution ``c / 2B`` in metres."""
        return self.c / (2.0 * self.B)

    @property
    def velocity_resolution(self) -> float:
        """Radial-speed resolution ``c / (2 f0 Tc Mc)`` in m/s."""
        return self.c / (2.0 * self.f0 * self.Tc * self.Mc)

    @property
    def range_scale(self) -> float:
        """Bins per metre of summed TX-target-RX path."""
        return self.B / self.c

    @property
    def doppler_scale(self) -> float:
        """Doppler bins per m/s of projected velocity."""
        return self.f0 * self.Tc * self.Mc / self.c


@dataclass(frozen=True)
class SceneGeometry:
    tx: np.ndarray
    rx: np.ndarray

    def __post_init__(self):
        tx = np.asarray(self.tx, dtype=float).reshape(2)
        rx = np.asarray(self.rx, dtype=float)
        if rx.ndim != 2 or rx.shape[1] != 2:
            raise ValueError(f"rx must be a (Q, 2) array, got shape {rx.shape}")
        if rx.shape[0] < 2:
            raise ValueError(f"need at least 2 receivers, got {rx.shape[0]}")
        if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(rx))):
            raise ValueError("antenna positions must be finite")
        if np.any(np.linalg.norm(rx - tx, axis=1) <= _COINCIDENT_TOL):
            raise DegenerateGeometryError("degenerate geometry: a receiver coincides with the transmitter")
        gaps = np.linalg.norm(rx[:, None, :] - rx[None, :, :], axis=-1)
        gaps[np.diag_indices(len(rx))] = np.inf
        if np.any(gaps <= _COINCIDENT_TOL):
            raise DegenerateGeometryError("degenerate geometry: two receivers coincide")
        tx.setflags(write=False)
        rx = rx.copy()
        rx.setflags(write=False)
        object.__setattr__(self, "tx", tx)
        object.__setattr__(self, "rx", rx)

    @property
    def Q(self) -> int:
        return self.rx.shape[0]

    def permuted(self, order) -> SceneGeometry:
        return SceneGeometry(self.tx, self.rx[np.asarray(order)])


@dataclass(frozen=True)
class Target:
    x: np.ndarray
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))
    alpha: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(2))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(2))
        object.__setattr__(self, "alpha", complex(self.alpha))
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))):
            raise ValueError("target location and velocity must be finite")


@dataclass(frozen=True)
class SensedParams:
    r: np.ndarray  # (Q,) range bins
    u: np.ndarray  # (Q,) Doppler bins


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular lattice of 2-vectors.

    ``points`` is ordered x-major (``points[i * ny + j] = (xs[i], ys[j])``),
    which fixes the tie-break order of every argmax scan over the grid.
    """

    xs: np.ndarray
    ys: np.ndarray
    spacing: float
    density: float
    extents: tuple

    @cached_property
    def points(self) -> np.ndarray:
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        pts.setflags(write=False)
        return pts

    @property
    def shape(self) -> tuple:
        return (len(self.xs), len(self.ys))

    def __len__(self):
        return len(self.xs) * len(self.ys)


# Location and velocity grids share the lattice structure.
LocationGrid = Grid
VelocityGrid = Grid


def _unit_and_dist(points, anchor):
    diff = points - anchor
    dist = np.linalg.norm(diff, axis=-1)
    return diff, dist


def _check_distances(*dists):
    for d in dists:
        if np.any(d <= _COINCIDENT_TOL):
            raise DegenerateGeometryError("degenerate geometry: location coincides with an antenna")


def range_bins(geom: SceneGeometry, cfg: WaveformConfig, points) -> np.ndarray:
    """Sensed range of every point for every receiver, shape ``(N, Q)``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    _, d_tx = _unit_and_dist(pts, geom.tx)
    d_rx = np.linalg.norm(pts[:, None, :] - geom.rx[None, :, :], axis=-1)
    _check_distances(d_tx, d_rx)
    return cfg.range_scale * (d_tx[:, None] + d_rx)


def doppler_directions(geom: SceneGeometry, x) -> np.ndarray:
    """Bistatic direction vectors ``e_tx + e_rx_q`` at ``x``, shape ``(Q, 2)``."""
    x = np.asarray(x, dtype=float).reshape(2)
    diff_tx, d_tx = _unit_and_dist(x, geom.tx)
    diff_rx, d_rx = _unit_and_dist(x[None, :], geom.rx)
    _check_distances(np.atleast_1d(d_tx), d_rx)
    return diff_tx / d_tx + diff_rx / d_rx[:, None]


def doppler_bins(geom: SceneGeometry, cfg: WaveformConfig, x, velocities) -> np.ndarray:
    """Sensed Doppler at location ``x`` for each velocity, shape ``(N, Q)``."""
    vel = np.atleast_2d(np.asarray(velocities, dtype=float))
    return cfg.doppler_scale * vel @ doppler_directions(geom, x).T


def range_sensing(geom: SceneGeometry, cfg: WaveformConfig, q: int, x) -> float:
    if not 0 <= q < geom.Q:
        raise IndexError(f"receiver index {q} out of range for Q={geom.Q}")
    return float(range_bins(geom, cfg, x)[0, q])


def speed_sensing(geom: SceneGeometry, cfg: WaveformConfig, q: int, x, v) -> float:
    if not 0 <= q < geom.Q:
        raise IndexError(f"receiver index {q} out of range for Q={geom.Q}")
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("velocity must be finite")
    return float(doppler_bins(geom, cfg, x, v)[0, q])


def sense(geom: SceneGeometry, cfg: WaveformConfig, x, v) -> SensedParams:
    return SensedParams(r=range_bins(geom, cfg, x)[0], u=doppler_bins(geom, cfg, x, v)[0])


def range_atom(r: float, Ms: int) -> np.ndarray:
    return np.exp(2j * np.pi * r * np.arange(Ms) / Ms)


def doppler_atom(u: float, Mc: int) -> np.ndarray:
    return np.exp(2j * np.pi * u * np.arange(Mc) / Mc)


def atom_matrix(params, M: int) -> np.ndarray:
    """Rows ``exp(j 2 pi p m / M)`` for every parameter ``p``, shape ``(N, M)``.

    Built by phasor recurrence along ``m``; every ``RENORM_PERIOD`` steps the
    running phasor is re-seeded from the exact exponential to bound drift.
    """
    p = np.asarray(params, dtype=float).ravel()
    step = np.exp(2j * np.pi * p / M)
    out = np.empty((M, p.size), dtype=complex)
    out[0] = 1.0
    for m in range(1, M):
        if m % RENORM_PERIOD == 0:
            out[m] = np.exp(2j * np.pi * p * m / M)
        else:
            np.multiply(out[m - 1], step, out=out[m])
    return out.T


def _axis(lo, hi, spacing):
    count = int(np.floor((hi - lo) / spacing + 1e-9)) + 1
    return lo + spacing * np.arange(count)


def build_location_grid(extents, cfg: WaveformConfig, d: float) -> Grid:
    """Lattice over ``extents = (xmin, xmax, ymin, ymax)`` with spacing ``c/(2B)/d``.

    Axes start at the lower corner; each holds ``floor(extent/spacing) + 1`` bins.
    """
    if not d > 0:
        raise ValueError(f"grid density must be positive, got {d!r}")
    xmin, xmax, ymin, ymax = (float(e) for e in extents)
    if not (xmax >= xmin and ymax >= ymin) or not np.all(np.isfinite([xmin, xmax, ymin, ymax])):
        raise ValueError(f"empty or invalid extents {extents!r}")
    spacing = cfg.range_resolution / d
    return Grid(
        xs=_axis(xmin, xmax, spacing),
        ys=_axis(ymin, ymax, spacing),
        spacing=spacing,
        density=float(d),
        extents=(xmin, xmax, ymin, ymax),
    )


def build_velocity_grid(bound: float, cfg: WaveformConfig, d: float = 1.0) -> Grid:
    """Origin-centred lattice over ``[-bound, bound]^2``, spacing ``velocity_resolution/d``."""
    if not bound > 0:
        raise ValueError(f"speed bound must be positive, got {bound!r}")
    if not d > 0:
        raise ValueError(f"grid density must be positive, got {d!r}")
    spacing = cfg.velocity_resolution / d
    n = int(np.floor(bound / spacing + 1e-9))
    axis = spacing * np.arange(-n, n + 1)
    return Grid(xs=axis, ys=axis.copy(), spacing=spacing, density=float(d),
                extents=(-bound, bound, -bound, bound))


def geometry_hash(geom: SceneGeometry, cfg: WaveformConfig) -> int:
    """64-bit digest binding hop tables and frame files to a scene."""
    blob = struct.pack("<4d3I", cfg.f0, cfg.B, cfg.Tc, cfg.c, cfg.Mc, cfg.Ms, geom.Q)
    blob += np.ascontiguousarray(geom.tx, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(geom.rx, dtype="<f8").tobytes()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


@dataclass
class Estimate:
    """Location/velocity estimate with per-stage wall-clock durations in ns."""

    x: np.ndarray
    v: np.ndarray
    timings: dict = field(default_factory=dict)

    @property
    def online_ns(self) -> int:
        return int(sum(self.timings.values()))
