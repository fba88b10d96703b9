"""MRF1 frame capture files and comma-separated truth tracks."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import SPEED_OF_LIGHT, SceneGeometry, WaveformConfig, geometry_hash
from .synth import Frame

MRF_MAGIC = b"MRF1"
MRF_VERSION = 1
_FIXED = struct.Struct("<4s5I3d")


class FrameFormatError(ValueError):
    pass


@dataclass(frozen=True)
class FrameFileHeader:
    """MRF1 header.

    Layout (little-endian): magic ``MRF1``; u32 version, Q, Mc, Ms, frame
    count; f64 f0, B, Tc; then ``Q + 1`` pairs of f64 antenna positions, the
    transmitter first.  The payload follows as complex entries stored as
    (real, imag) f64 pairs, frame-major, then receiver-major, then row-major.
    """

    Q: int
    Mc: int
    Ms: int
    n_frames: int
    f0: float
    B: float
    Tc: float
    positions: np.ndarray  # (Q + 1, 2), transmitter first
    version: int = MRF_VERSION

    @classmethod
    def for_scene(cls, cfg: WaveformConfig, geom: SceneGeometry, n_frames: int) -> FrameFileHeader:
        return cls(geom.Q, cfg.Mc, cfg.Ms, n_frames, cfg.f0, cfg.B, cfg.Tc,
                   np.vstack([geom.tx, geom.rx]))

    def config(self, c: float = SPEED_OF_LIGHT) -> WaveformConfig:
        return WaveformConfig(f0=self.f0, B=self.B, Tc=self.Tc, Mc=self.Mc, Ms=self.Ms, c=c)

    def geometry(self) -> SceneGeometry:
        pos = np.asarray(self.positions, dtype=float)
        return SceneGeometry(pos[0], pos[1:])

    @property
    def size(self) -> int:
        return _FIXED.size + 16 * (self.Q + 1)

    @property
    def payload_size(self) -> int:
        return self.n_frames * self.Q * self.Mc * self.Ms * 16

    def pack(self) -> bytes:
        pos = np.ascontiguousarray(self.positions, dtype="<f8")
        if pos.shape != (self.Q + 1, 2):
            raise FrameFormatError(f"geometry block must be ({self.Q + 1}, 2), got {pos.shape}")
        return _FIXED.pack(MRF_MAGIC, self.version, self.Q, self.Mc, self.Ms, self.n_frames,
                           self.f0, self.B, self.Tc) + pos.tobytes()


def write_frames(path, header: FrameFileHeader, frames) -> None:
    frames = list(frames)
    if len(frames) != header.n_frames:
        raise FrameFormatError(f"header declares {header.n_frames} frames, got {len(frames)}")
    shape = (header.Q, header.Mc, header.Ms)
    for n, fr in enumerate(frames):
        data = fr.data if isinstance(fr, Frame) else np.asarray(fr)
        if data.shape != shape:
            raise FrameFormatError(f"frame {n} has shape {data.shape}, header declares {shape}")
    payload = np.empty((header.n_frames,) + shape, dtype="<c16")
    for n, fr in enumerate(frames):
        payload[n] = fr.data if isinstance(fr, Frame) else fr
    blob = header.pack() + payload.tobytes()
    with open(path, "wb") as fh:
        written = fh.write(blob)
    if written != len(blob):
        raise OSError(f"short write to {path}: {written} of {len(blob)} bytes")


def read_frames(path) -> tuple[FrameFileHeader, list[Frame]]:
    blob = Path(path).read_bytes()
    if len(blob) < _FIXED.size:
        raise FrameFormatError(f"{path}: truncated header, expected at least {_FIXED.size} bytes, got {len(blob)}")
    magic, version, Q, Mc, Ms, n_frames, f0, B, Tc = _FIXED.unpack_from(blob)
    if magic != MRF_MAGIC:
        raise FrameFormatError(f"{path}: bad magic {magic!r}, expected {MRF_MAGIC!r}")
    if version != MRF_VERSION:
        raise FrameFormatError(f"{path}: unsupported version {version}")
    geo_bytes = 16 * (Q + 1)
    if len(blob) < _FIXED.size + geo_bytes:
        raise FrameFormatError(f"{path}: truncated geometry block, expected {_FIXED.size + geo_bytes} bytes, "
                               f"got {len(blob)}")
    pos = np.frombuffer(blob, dtype="<f8", count=2 * (Q + 1), offset=_FIXED.size).reshape(Q + 1, 2).copy()
    header = FrameFileHeader(Q, Mc, Ms, n_frames, f0, B, Tc, pos, version)
    expected = header.size + header.payload_size
    if len(blob) != expected:
        raise FrameFormatError(f"{path}: expected {expected} bytes, got {len(blob)}")
    data = np.frombuffer(blob, dtype="<c16", offset=header.size).reshape(n_frames, Q, Mc, Ms)
    try:
        h = geometry_hash(header.geometry(), header.config())
    except ValueError:
        h = None
    return header, [Frame(data[n].astype(complex), h) for n in range(n_frames)]


@dataclass(frozen=True)
class TruthRecord:
    t: float
    x: np.ndarray
    v: np.ndarray


def read_truth_track(path) -> list[TruthRecord]:
    """Parse ``time, x0, x1, v0, v1`` lines; ``#`` starts a comment."""
    track = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 comma-separated fields, got {len(fields)}")
            try:
                vals = [float(f) for f in fields]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if track and vals[0] <= track[-1].t:
                raise ValueError(f"{path}:{lineno}: time {vals[0]} does not increase (previous {track[-1].t})")
            track.append(TruthRecord(vals[0], np.array(vals[1:3]), np.array(vals[3:5])))
    return track


def write_truth_track(path, records) -> None:
    with open(path, "w") as fh:
        fh.write("# time_s, x0_m, x1_m, v0_mps, v1_mps\n")
        for rec in records:
            vals = (rec.t, rec.x[0], rec.x[1], rec.v[0], rec.v[1])
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")
