"""Binary snapshots, run manifests, and fit reports.

Snapshot layout (bit-exact across platforms): a fixed 64-byte header
followed by the row-major little-endian float64 samples.

    offset  0  magic "ZK2D" (4 bytes)
    offset  4  version        uint16 LE (currently 1)
    offset  6  kind           uint16 LE (0 evolution state, 1 soliton profile)
    offset  8  nx             uint16 LE
    offset 10  ny             uint16 LE
    offset 12  p              uint32 LE
    offset 16  lx, ly         float64 LE
    offset 32  t              float64 LE (profiles: 0)
    offset 40  v              float64 LE (frame velocity; profiles: speed c)
    offset 48  x_m            float64 LE (profiles: construction residual)
    offset 56  y_m            float64 LE (profiles: 0)
    offset 64  samples        nx*ny float64 LE, x varying along rows

Profiles reuse the state layout with the three overloaded slots above, so
one reader serves both kinds.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from zk2d.errors import ContractViolationError
from zk2d.grid import Field, GridSpec
from zk2d.soliton import SolitonProfile

_MAGIC = b"ZK2D"
_VERSION = 1
_HEADER = struct.Struct("<4s4HI6d")
KIND_STATE = 0
KIND_PROFILE = 1

assert _HEADER.size == 64


@dataclass
class SnapshotHeader:
    kind: int
    nx: int
    ny: int
    p: int
    lx: float
    ly: float
    t: float
    v: float
    x_m: float
    y_m: float

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.nx, self.ny, self.lx, self.ly)


def _write(path, header: SnapshotHeader, values: np.ndarray) -> None:
    if values.shape != (header.nx, header.ny):
        raise ContractViolationError("sample shape does not match header")
    if header.nx >= 1 << 16 or header.ny >= 1 << 16:
        raise ContractViolationError("mode counts beyond 65535 are not representable")
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                _MAGIC,
                _VERSION,
                header.kind,
                header.nx,
                header.ny,
                header.p,
                header.lx,
                header.ly,
                header.t,
                header.v,
                header.x_m,
                header.y_m,
            )
        )
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def write_state_snapshot(path, field: Field, p: int, t: float, v: float,
                         x_m: float, y_m: float) -> None:
    g = field.grid
    header = SnapshotHeader(KIND_STATE, g.nx, g.ny, p, g.lx, g.ly, t, v, x_m, y_m)
    _write(path, header, field.values)


def write_profile_snapshot(path, profile: SolitonProfile) -> None:
    g = profile.grid
    header = SnapshotHeader(
        KIND_PROFILE, g.nx, g.ny, profile.p, g.lx, g.ly,
        0.0, profile.c, profile.residual_sup, 0.0,
    )
    _write(path, header, profile.field.values)


def read_snapshot(path) -> tuple[SnapshotHeader, Field]:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ContractViolationError(f"{path}: truncated snapshot header")
        magic, version, kind, nx, ny, p, lx, ly, t, v, x_m, y_m = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ContractViolationError(f"{path}: not a ZK2D snapshot")
        if version != _VERSION:
            raise ContractViolationError(f"{path}: unsupported snapshot version {version}")
        data = np.frombuffer(fh.read(nx * ny * 8), dtype="<f8")
    if data.size != nx * ny:
        raise ContractViolationError(f"{path}: truncated sample block")
    header = SnapshotHeader(kind, nx, ny, p, lx, ly, t, v, x_m, y_m)
    values = data.reshape(nx, ny).astype(np.float64)
    return header, Field(header.grid, values)


def read_profile(path) -> SolitonProfile:
    header, field = read_snapshot(path)
    if header.kind != KIND_PROFILE:
        raise ContractViolationError(f"{path}: not a soliton profile snapshot")
    return SolitonProfile(field, header.p, header.v, header.x_m)


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_fit_report(path, fits) -> None:
    """Key-value text report of one or more power-law fits."""
    lines = []
    for fit in fits:
        lines += [
            f"series = {fit.series_name}",
            f"method = {fit.method}",
            f"window = {fit.sample_count} samples (rows {fit.window[0]}..{fit.window[1]})",
            f"a = {fit.a!r}",
            f"b = {fit.b!r}",
            f"t_star = {fit.t_star!r}",
            f"rms_residual = {fit.rms_residual!r}",
            "",
        ]
    Path(path).write_text("\n".join(lines))


def write_fit_model_csv(path, fit, t: np.ndarray, data: np.ndarray) -> None:
    """CSV of (t, model, data) for plotting a fit against its series."""
    model = fit.model(t)
    with open(path, "w") as fh:
        fh.write("t,model,data\n")
        for row in zip(t, model, data):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
