"""Off-grid Fourier-atom interpolation and offline hop-table construction.

An off-grid atom ``a(r)`` is approximated by a combination of atoms sitting on
the oversampled FFT range grid ``i / P_r``.  For a measurement ``y`` whose
zero-padded FFT is ``z`` (so ``z[i] = <y, a(i / P_r)>``), the stored
coefficients ``c`` satisfy ``<y, a(r)> ~= c^T z[I]``.
"""

from __future__ import annotations

import enum
import struct
import time
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .model import Grid, SceneGeometry, WaveformConfig, geometry_hash, range_atom, range_bins

GHT_MAGIC = b"GHT1"
GHT_VERSION = 1
_GHT_HEADER = struct.Struct("<4s6IQ")

# Gram matrices with a worse condition number get Tikhonov jitter.
_COND_LIMIT = 1e10


class HopTableError(ValueError):
    pass


class StaleHopTableError(HopTableError):
    """Hop table does not belong to the scene or frame it is used with."""


class InterpScheme(enum.Enum):
    NEAREST = "nearest"
    LINEAR = "linear"
    POLY3 = "poly3"

    @property
    def K(self) -> int:
        return {"nearest": 1, "linear": 2, "poly3": 3}[self.value]

    @classmethod
    def parse(cls, value) -> InterpScheme:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown interpolation scheme {value!r}; valid: {names}") from None

    @classmethod
    def from_K(cls, K: int) -> InterpScheme:
        for s in cls:
            if s.K == K:
                return s
        raise HopTableError(f"no interpolation scheme with K={K}")


def fft_range_grid(Ms: int, P_r: int = 1) -> np.ndarray:
    """Range bins ``i / P_r`` probed by a ``P_r * Ms``-point zero-padded FFT."""
    if P_r < 1:
        raise ValueError(f"oversampling must be >= 1, got {P_r}")
    return np.arange(P_r * Ms) / P_r


def _dirichlet(f, M):
    """``sum_{m<M} exp(j 2 pi f m / M)`` in closed form."""
    f = np.asarray(f, dtype=float)
    half = np.pi * f / M
    den = np.sin(half)
    safe = np.where(den == 0, 1.0, den)
    mag = np.where(den == 0, float(M), np.sin(np.pi * f) / safe)
    return np.exp(1j * half * (M - 1)) * mag


def _poly3_inverse_gram(Ms, P_r):
    offsets = np.arange(3) / P_r
    gram = _dirichlet(offsets[None, :] - offsets[:, None], Ms)
    if np.linalg.cond(gram) > _COND_LIMIT:
        gram = gram + 1e-12 * np.trace(gram).real * np.eye(3)
    return np.linalg.inv(gram)


def interp_weights(r, Ms: int, P_r: int, scheme):
    """Vectorised atom interpolation.

    Returns ``(indices, weights)`` of shape ``(n, K)`` with
    ``a(r) ~= sum_k weights[k] * a(indices[k] / P_r)``.  Indices wrap modulo
    ``P_r * Ms`` since atoms are ``Ms``-periodic in ``r``.
    """
    scheme = InterpScheme.parse(scheme)
    L = P_r * Ms
    pos = np.mod(np.asarray(r, dtype=float).ravel(), Ms) * P_r
    if scheme is InterpScheme.NEAREST:
        idx = np.rint(pos).astype(np.int64)[:, None]
        w = np.ones(idx.shape, dtype=complex)
    elif scheme is InterpScheme.LINEAR:
        lo = np.floor(pos)
        t = pos - lo
        idx = lo.astype(np.int64)[:, None] + np.arange(2)
        w = np.column_stack([1.0 - t, t]).astype(complex)
    else:
        mid = np.rint(pos)
        delta = pos - mid
        idx = mid.astype(np.int64)[:, None] + np.arange(-1, 2)
        # rhs_j = <a(r), atom j> with atom j at offset (j - 1) / P_r from the nearest bin
        rhs = _dirichlet((delta[:, None] - np.arange(-1, 2)) / P_r, Ms)
        w = rhs @ _poly3_inverse_gram(Ms, P_r).T
        exact = delta == 0
        w[exact] = (0.0, 1.0, 0.0)
    return np.mod(idx, L), w


def coeffs_for(r: float, Ms: int, P_r: int, scheme):
    """Index set and coefficients for one range; ``c^T z[I]`` approximates ``<y, a(r)>``."""
    idx, w = interp_weights([r], Ms, P_r, scheme)
    return idx[0], w[0].conj()


def atom_residual(r, Ms: int, P_r: int, scheme) -> np.ndarray:
    """Relative error ``|a(r) - sum_k w_k a(r_k)| / |a(r)|``, evaluated on explicit atoms."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    idx, w = interp_weights(r, Ms, P_r, scheme)
    grid = fft_range_grid(Ms, P_r)
    out = np.empty(len(r))
    for n in range(len(r)):
        approx = sum(w[n, k] * range_atom(grid[idx[n, k]], Ms) for k in range(idx.shape[1]))
        out[n] = np.linalg.norm(range_atom(r[n], Ms) - approx) / np.sqrt(Ms)
    return out


@dataclass(frozen=True)
class HopTable:
    """Per location bin and receiver: ``K`` FFT indices and coefficients.

    ``indices`` and ``coeffs`` have shape ``(n_bins, Q, K)``.
    """

    indices: np.ndarray
    coeffs: np.ndarray
    oversample: int
    Ms: int
    geometry_hash: int
    grid: Grid | None = None
    build_ns: int = 0

    @property
    def n_bins(self) -> int:
        return self.indices.shape[0]

    @property
    def Q(self) -> int:
        return self.indices.shape[1]

    @property
    def K(self) -> int:
        return self.indices.shape[2]

    @property
    def scheme(self) -> InterpScheme:
        return InterpScheme.from_K(self.K)

    @cached_property
    def lag_plan(self):
        """Lag structure for evaluating all bins from chirp-summed cross-spectra.

        ``sum_mc |c^T z_mc[I]|^2 = sum_jk c_j conj(c_k) R[I_j, I_k]`` with
        ``R[a, b] = sum_mc z_mc[a] conj(z_mc[b])``, and ``R[a, b]`` only depends
        on ``a`` and the lag ``(b - a) mod L``.  Returns ``(lags, slots, weights)``
        where ``slots[n, q, j, k]`` indexes ``lags`` and
        ``weights[n, q, j, k] = c_j conj(c_k)``.
        """
        L = self.oversample * self.Ms
        idx = self.indices.astype(np.int64)
        lag = np.mod(idx[..., None, :] - idx[..., :, None], L)
        lags, slots = np.unique(lag, return_inverse=True)
        weights = self.coeffs[..., :, None] * self.coeffs[..., None, :].conj()
        return lags, slots.reshape(lag.shape), weights

    def check(self, geom: SceneGeometry, cfg: WaveformConfig, grid: Grid | None = None):
        h = geometry_hash(geom, cfg)
        if h != self.geometry_hash:
            raise StaleHopTableError(
                f"stale hop table: built for scene hash {self.geometry_hash:#018x}, used with {h:#018x}"
            )
        if self.Q != geom.Q or self.Ms != cfg.Ms:
            raise StaleHopTableError("stale hop table: receiver count or samples per chirp differ")
        if grid is not None and len(grid) != self.n_bins:
            raise StaleHopTableError(f"stale hop table: {self.n_bins} bins vs grid of {len(grid)}")


def precompute_hop_table(grid: Grid, geom: SceneGeometry, cfg: WaveformConfig,
                         P_r: int = 4, scheme="poly3") -> HopTable:
    scheme = InterpScheme.parse(scheme)
    t0 = time.perf_counter_ns()
    r = range_bins(geom, cfg, grid.points)
    bad = np.flatnonzero(np.any((r < 0) | (r >= cfg.Ms), axis=1))
    if bad.size:
        shown = ", ".join(str(b) for b in bad[:10]) + (" ..." if bad.size > 10 else "")
        raise HopTableError(f"{bad.size} location bins have sensed range outside [0, {cfg.Ms}): {shown}")
    idx, w = interp_weights(r.ravel(), cfg.Ms, P_r, scheme)
    shape = (len(grid), geom.Q, scheme.K)
    table = HopTable(
        indices=idx.reshape(shape).astype(np.uint32),
        coeffs=w.conj().reshape(shape),
        oversample=int(P_r),
        Ms=cfg.Ms,
        geometry_hash=geometry_hash(geom, cfg),
        grid=grid,
    )
    table.lag_plan  # part of the offline cost
    return _with_build_time(table, time.perf_counter_ns() - t0)


def _with_build_time(table, ns):
    object.__setattr__(table, "build_ns", int(ns))
    return table


def _record_dtype(K):
    return np.dtype([("idx", "<u4", (K,)), ("coef", "<f8", (K, 2))])


def write_hop_table(path, table: HopTable) -> None:
    header = _GHT_HEADER.pack(GHT_MAGIC, GHT_VERSION, table.Q, table.n_bins, table.K,
                              table.oversample, table.Ms, table.geometry_hash)
    rec = np.empty(table.n_bins * table.Q, dtype=_record_dtype(table.K))
    rec["idx"] = table.indices.reshape(-1, table.K)
    coef = table.coeffs.reshape(-1, table.K)
    rec["coef"][..., 0] = coef.real
    rec["coef"][..., 1] = coef.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rec.tobytes())


def read_hop_table(path, grid: Grid | None = None, geom: SceneGeometry | None = None,
                   cfg: WaveformConfig | None = None) -> HopTable:
    """Load a GHT1 file; when ``geom``/``cfg``/``grid`` are given the table is checked against them."""
    blob = Path(path).read_bytes()
    if len(blob) < _GHT_HEADER.size:
        raise HopTableError(f"{path}: truncated header ({len(blob)} of {_GHT_HEADER.size} bytes)")
    magic, version, Q, n_bins, K, P_r, Ms, h = _GHT_HEADER.unpack_from(blob)
    if magic != GHT_MAGIC:
        raise HopTableError(f"{path}: bad magic {magic!r}, expected {GHT_MAGIC!r}")
    if version != GHT_VERSION:
        raise HopTableError(f"{path}: unsupported version {version}")
    InterpScheme.from_K(K)
    dtype = _record_dtype(K)
    expected = _GHT_HEADER.size + n_bins * Q * dtype.itemsize
    if len(blob) != expected:
        raise HopTableError(f"{path}: expected {expected} bytes, found {len(blob)}")
    rec = np.frombuffer(blob, dtype=dtype, offset=_GHT_HEADER.size)
    idx = rec["idx"].reshape(n_bins, Q, K).copy()
    if np.any(idx >= P_r * Ms):
        raise HopTableError(f"{path}: index outside [0, {P_r * Ms})")
    coef = (rec["coef"][..., 0] + 1j * rec["coef"][..., 1]).reshape(n_bins, Q, K)
    table = HopTable(idx, coef, int(P_r), int(Ms), int(h), grid)
    if geom is not None and cfg is not None:
        table.check(geom, cfg, grid)
    elif grid is not None and len(grid) != n_bins:
        raise StaleHopTableError(f"stale hop table: {n_bins} bins vs grid of {len(grid)}")
    return table
