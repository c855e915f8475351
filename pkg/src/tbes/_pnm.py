"""Minimal binary PNM (P5/P6) reading and writing.

PPM (P6, maxval 255) is the bit-exact reference image format; PGM (P5,
8- or 16-bit big-endian) carries label maps.
"""
from __future__ import annotations

import numpy as np


def _read_header_tokens(f, count: int) -> list[bytes]:
    """Read `count` whitespace-separated header tokens, skipping # comments."""
    tokens: list[bytes] = []
    tok = b""
    while len(tokens) < count:
        ch = f.read(1)
        if ch == b"":
            raise ValueError("truncated PNM header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = f.read(1)
            ch = b" "
        if ch.isspace():
            if tok:
                tokens.append(tok)
                tok = b""
            continue
        tok += ch
    return tokens


def _read_raster(f, shape: tuple[int, ...], maxval: int) -> np.ndarray:
    count = int(np.prod(shape))
    if maxval < 256:
        raw = f.read(count)
        if len(raw) != count:
            raise ValueError("truncated PNM raster")
        return np.frombuffer(raw, dtype=np.uint8).reshape(shape)
    raw = f.read(2 * count)
    if len(raw) != 2 * count:
        raise ValueError("truncated PNM raster")
    return np.frombuffer(raw, dtype=">u2").reshape(shape)


def read_ppm(path) -> np.ndarray:
    """Read an 8-bit binary PPM; returns a (H, W, 3) uint8 array."""
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic != b"P6":
            raise ValueError(f"not a binary PPM (P6) file: {path}")
        width, height, maxval = (int(t) for t in _read_header_tokens(f, 3))
        if maxval != 255:
            raise ValueError(f"unsupported bit depth: PPM maxval {maxval} (only 255 supported)")
        return _read_raster(f, (height, width, 3), maxval)


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (8- or 16-bit); returns a (H, W) integer array."""
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic != b"P5":
            raise ValueError(f"not a binary PGM (P5) file: {path}")
        width, height, maxval = (int(t) for t in _read_header_tokens(f, 3))
        if not 0 < maxval < 65536:
            raise ValueError(f"invalid PGM maxval {maxval}")
        return _read_raster(f, (height, width), maxval).astype(np.int32)


def write_pgm(path, values: np.ndarray, maxval: int | None = None) -> None:
    """Write a (H, W) nonnegative integer array as binary PGM (16-bit if needed)."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    hi = int(arr.max()) if arr.size else 0
    if maxval is None:
        maxval = 255 if hi < 256 else 65535
    if hi > maxval or arr.min() < 0:
        raise ValueError(f"values out of range for PGM maxval {maxval}")
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode("ascii")
    payload = arr.astype(np.uint8 if maxval < 256 else ">u2").tobytes()
    with open(path, "wb") as f:
        f.write(header + payload)
