"""Matrix, image and sinogram file formats.

MXF: 16-byte header (``b"MXF1"``, rows and cols as little-endian uint32,
4 reserved zero bytes) followed by rows*cols little-endian float64 values in
row-major order.

PGM: binary 16-bit (P5, maxval 65535, big-endian samples). Values are mapped
affinely onto [0, 65535]; the mapping is written to ``<file>.scale`` as
``offset`` and ``scale`` lines so that ``value = offset + scale * level``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ModelFormatError
from .radon import Sinogram

MXF_MAGIC = b"MXF1"
_MXF_HEADER = struct.Struct("<4sIII")


def write_mxf(path, matrix) -> None:
    a = np.asarray(matrix, dtype="<f8")
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"only 2-D matrices can be written, got ndim={a.ndim}")
    with open(path, "wb") as fh:
        fh.write(_MXF_HEADER.pack(MXF_MAGIC, a.shape[0], a.shape[1], 0))
        fh.write(np.ascontiguousarray(a).tobytes())


def read_mxf(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _MXF_HEADER.size:
        raise ModelFormatError(f"{path}: file too short for an MXF header")
    magic, rows, cols, _ = _MXF_HEADER.unpack_from(raw)
    if magic != MXF_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}, expected {MXF_MAGIC!r}")
    body = raw[_MXF_HEADER.size:]
    if len(body) != rows * cols * 8:
        raise ModelFormatError(f"{path}: expected {rows * cols * 8} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def write_pgm16(path, img) -> tuple[float, float]:
    """Write ``img`` as a 16-bit PGM plus scale sidecar; returns (offset, scale)."""
    a = np.asarray(img, dtype=np.float64)
    lo, hi = float(a.min()), float(a.max())
    scale = (hi - lo) / 65535.0 if hi > lo else 1.0
    levels = np.rint((a - lo) / scale).clip(0, 65535).astype(">u2")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n65535\n" % (a.shape[1], a.shape[0]))
        fh.write(levels.tobytes())
    path.with_name(path.name + ".scale").write_text(f"offset {lo!r}\nscale {scale!r}\n")
    return lo, scale


def read_pgm16(path) -> np.ndarray:
    """Read a 16-bit PGM written by :func:`write_pgm16`, restoring values via the sidecar."""
    path = Path(path)
    raw = path.read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1
    if tokens[0] != b"P5" or int(tokens[3]) != 65535:
        raise ModelFormatError(f"{path}: not a 16-bit binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    levels = np.frombuffer(raw[pos:pos + 2 * w * h], dtype=">u2").reshape(h, w)
    sidecar = path.with_name(path.name + ".scale")
    offset, scale = 0.0, 1.0
    if sidecar.exists():
        fields = dict(line.split() for line in sidecar.read_text().splitlines() if line.strip())
        offset, scale = float(fields["offset"]), float(fields["scale"])
    return offset + scale * levels.astype(np.float64)


def write_sinogram(path, sino: Sinogram) -> None:
    """Write the data as MXF and the angles to ``<file>.angles``, one per line."""
    path = Path(path)
    write_mxf(path, sino.data)
    path.with_name(path.name + ".angles").write_text(
        "".join(f"{a!r}\n" for a in sino.angles_deg.tolist())
    )


def read_sinogram(path) -> Sinogram:
    path = Path(path)
    data = read_mxf(path)
    angles = [float(line) for line in path.with_name(path.name + ".angles").read_text().split()]
    return Sinogram(data, np.array(angles))
