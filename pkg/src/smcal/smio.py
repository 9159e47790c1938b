"""File formats and configuration for the pipeline.

SMB container (system matrices): magic "SMB1", version u16, provenance
u8, grid dims u32 x3 (nx, ny, nz), FOV f64 x3, row count u32; then per
row: channel u8, freq_index u32, and the complex field as interleaved
real/imaginary float64 little-endian in (z, y, x) C order. Values are
stored at full double precision so write-then-read is bit-exact.

PHB container (phantoms / reconstructions): magic "PHB1", version u16,
dims u32 x3, FOV f64 x3, then the real float64 field.

Config files are line-based ``key = value`` text with ``#`` comments;
unknown keys are rejected. All output files are written atomically
(temp file + rename).
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .core import (
    CHANNELS,
    DomainError,
    Grid3,
    Phantom,
    PROVENANCES,
    SMRow,
    SystemMatrix,
)

_SMB_MAGIC = b"SMB1"
_PHB_MAGIC = b"PHB1"
_VERSION = 1


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def write_sm(path, sm: SystemMatrix) -> None:
    parts = [
        struct.pack(
            "<4sHBIIIdddI",
            _SMB_MAGIC, _VERSION, PROVENANCES.index(sm.provenance),
            sm.grid.nx, sm.grid.ny, sm.grid.nz,
            sm.grid.fov_x, sm.grid.fov_y, sm.grid.fov_z,
            len(sm),
        )
    ]
    for row in sm.rows:
        parts.append(struct.pack("<BI", CHANNELS.index(row.channel), row.freq_index))
        parts.append(np.ascontiguousarray(row.values, dtype="<c16").tobytes())
    atomic_write_bytes(path, b"".join(parts))


def read_sm(path) -> SystemMatrix:
    data = Path(path).read_bytes()
    head_fmt = "<4sHBIIIdddI"
    head_size = struct.calcsize(head_fmt)
    magic, version, prov, nx, ny, nz, fx, fy, fz, n_rows = struct.unpack(
        head_fmt, data[:head_size])
    if magic != _SMB_MAGIC or version != _VERSION:
        raise DomainError(f"{path}: not an SMB v{_VERSION} file")
    grid = Grid3(nx=nx, ny=ny, nz=nz, fov_x=fx, fov_y=fy, fov_z=fz)
    offset = head_size
    row_head = struct.calcsize("<BI")
    nbytes = grid.n_voxels * 16
    rows = []
    for _ in range(n_rows):
        ch_i, k = struct.unpack("<BI", data[offset:offset + row_head])
        offset += row_head
        vals = np.frombuffer(data[offset:offset + nbytes], dtype="<c16")
        offset += nbytes
        rows.append(SMRow(CHANNELS[ch_i], k, vals.reshape(grid.shape), grid))
    return SystemMatrix(grid, tuple(rows), provenance=PROVENANCES[prov])


def write_phantom(path, ph: Phantom) -> None:
    head = struct.pack(
        "<4sHIIIddd",
        _PHB_MAGIC, _VERSION,
        ph.grid.nx, ph.grid.ny, ph.grid.nz,
        ph.grid.fov_x, ph.grid.fov_y, ph.grid.fov_z,
    )
    atomic_write_bytes(
        path, head + np.ascontiguousarray(ph.concentration, dtype="<f8").tobytes())


def read_phantom(path) -> Phantom:
    data = Path(path).read_bytes()
    head_fmt = "<4sHIIIddd"
    head_size = struct.calcsize(head_fmt)
    magic, version, nx, ny, nz, fx, fy, fz = struct.unpack(head_fmt, data[:head_size])
    if magic != _PHB_MAGIC or version != _VERSION:
        raise DomainError(f"{path}: not a PHB v{_VERSION} file")
    grid = Grid3(nx=nx, ny=ny, nz=nz, fov_x=fx, fov_y=fy, fov_z=fz)
    vals = np.frombuffer(data[head_size:], dtype="<f8")
    return Phantom(grid, vals.reshape(grid.shape))


def write_pgm(path, image: np.ndarray) -> None:
    """Binary P5 graymap, min-max normalized over the slice."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DomainError("PGM export expects a 2D slice")
    lo, hi = img.min(), img.max()
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pix = np.round((img - lo) * scale).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    atomic_write_bytes(path, header + pix.tobytes())


def central_slice(values: np.ndarray) -> np.ndarray:
    """Central z slice of a (nz, ny, nx) field (modulus for complex)."""
    arr = np.abs(values) if np.iscomplexobj(values) else np.asarray(values)
    return arr[arr.shape[0] // 2]


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def parse_config(text: str, known_keys) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    known = set(known_keys)
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise DomainError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_config(path, known_keys) -> dict[str, str]:
    return parse_config(Path(path).read_text(), known_keys)
