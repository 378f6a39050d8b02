"""Minimal PGM reader for the harness's 8-bit image dumps."""

from __future__ import annotations

import numpy as np


def read_pgm(path) -> np.ndarray:
    """Read an ASCII (P2) or binary (P5) PGM into a 2D integer array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"P2":
        tokens = data.decode().split()
        width, height = int(tokens[1]), int(tokens[2])
        vals = np.array(tokens[4:4 + width * height], dtype=int)
        if vals.size != width * height:
            raise ValueError(f"{path}: truncated PGM raster")
        return vals.reshape(height, width)
    if data[:2] == b"P5":
        parts = data.split(maxsplit=4)
        width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
        dtype = np.uint8 if maxval < 256 else ">u2"
        raster = np.frombuffer(parts[4], dtype=dtype, count=width * height)
        return raster.reshape(height, width).astype(int)
    raise ValueError(f"{path}: not a PGM file")
