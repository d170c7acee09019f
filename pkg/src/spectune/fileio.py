"""On-disk formats: SPVOL1 volumes, metadata sidecars, PGM slices, run configs.

SPVOL1 layout (all little-endian)::

    offset 0   6 bytes   b"SPVOL1"
    offset 6   uint32    X
    offset 10  uint32    Y
    offset 14  uint32    Z
    offset 18  float32[X*Y*Z], x fastest, then y, then z

Sinograms use the same container with X = detector bins, Y = angles,
Z = slices; the ``.meta`` sidecar says which is which.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SPVOL1"
HEADER = struct.Struct("<III")
HEADER_SIZE = len(MAGIC) + HEADER.size


class FormatError(ValueError):
    """Malformed file; ``offset`` is the byte position where parsing failed."""

    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


def encode_volume(volume):
    vol = np.asarray(volume)
    if vol.ndim == 2:
        vol = vol[None]
    if vol.ndim != 3:
        raise ValueError(f"expected a (Z, Y, X) array, got shape {vol.shape}")
    Z, Y, X = vol.shape
    return MAGIC + HEADER.pack(X, Y, Z) + np.ascontiguousarray(vol, dtype="<f4").tobytes()


def decode_volume(buf):
    """Parse SPVOL1 bytes into a float64 ``(Z, Y, X)`` array."""
    if len(buf) < len(MAGIC) or buf[: len(MAGIC)] != MAGIC:
        raise FormatError("missing SPVOL1 magic", 0)
    if len(buf) < HEADER_SIZE:
        raise FormatError("truncated header", len(buf))
    X, Y, Z = HEADER.unpack_from(buf, len(MAGIC))
    if 0 in (X, Y, Z):
        raise FormatError(f"empty dimensions {X}x{Y}x{Z}", len(MAGIC))
    expected = HEADER_SIZE + 4 * X * Y * Z
    if len(buf) != expected:
        raise FormatError(
            f"payload size mismatch: header declares {X}x{Y}x{Z} ({expected} bytes total), "
            f"file has {len(buf)}",
            min(len(buf), expected),
        )
    data = np.frombuffer(buf, dtype="<f4", offset=HEADER_SIZE).reshape(Z, Y, X)
    if not np.all(np.isfinite(data)):
        bad = int(np.flatnonzero(~np.isfinite(data.ravel()))[0])
        raise FormatError("non-finite voxel value", HEADER_SIZE + 4 * bad)
    return data.astype(np.float64)


def write_volume(path, volume):
    Path(path).write_bytes(encode_volume(volume))


def read_volume(path):
    return decode_volume(Path(path).read_bytes())


def meta_path(path):
    return Path(str(path) + ".meta")


def format_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_meta(path, entries):
    lines = [f"{k}={format_value(v)}" for k, v in entries.items()]
    meta_path(path).write_text("\n".join(lines) + "\n")


def parse_keyvalue(text, source="<config>"):
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    offset = 0
    for lineno, raw in enumerate(text.splitlines(keepends=True), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            if "=" not in line:
                raise FormatError(f"{source}:{lineno}: expected key=value, got {line!r}", offset)
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise FormatError(f"{source}:{lineno}: empty key", offset)
            if key in out:
                raise FormatError(f"{source}:{lineno}: duplicate key {key!r}", offset)
            out[key] = value
        offset += len(raw.encode())
    return out


def read_meta(path):
    p = meta_path(path)
    if not p.exists():
        return {}
    return parse_keyvalue(p.read_text(), str(p))


def encode_pgm(image):
    """8-bit binary PGM of a 2-D array, min-max scaled; a flat image maps to 0."""
    img = np.asarray(image, dtype=float)
    lo, hi = img.min(), img.max()
    if hi > lo:
        px = np.rint((img - lo) * (255.0 / (hi - lo)))
    else:
        px = np.zeros_like(img)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode() + px.astype(np.uint8).tobytes()


def write_pgm(path, image):
    Path(path).write_bytes(encode_pgm(image))
