"""File formats: matrix-market operators, PGM previews, flat image CSV,
versioned convergence-trace CSV, and run summaries."""

from __future__ import annotations

import csv
import io
import json
import os

import numpy as np
import scipy.io
import scipy.sparse as sparse

TRACE_FORMAT_VERSION = 1
TRACE_MAGIC = f"# mlopt-trace-v{TRACE_FORMAT_VERSION}"
TRACE_HEADER = "k,level,step_type,f,grad_norm,step_size,grad_evals,wall_s"


def write_matrix_market(path, mat) -> None:
    """Persist a sparse matrix with enough digits to round-trip exactly."""
    scipy.io.mmwrite(str(path), sparse.coo_array(mat), precision=17)


def read_matrix_market(path) -> sparse.csr_array:
    return sparse.csr_array(scipy.io.mmread(str(path)))


def write_pgm(path, image_flat: np.ndarray, side: int,
              vmin: float = 0.0, vmax: float = 1.0) -> None:
    """8-bit ASCII PGM preview of a flat image, clipped to [vmin, vmax]."""
    img = np.asarray(image_flat, dtype=float).reshape(side, side)
    if vmax <= vmin:
        raise ValueError("write_pgm requires vmax > vmin")
    scaled = np.clip((img - vmin) / (vmax - vmin), 0.0, 1.0)
    pixels = np.rint(scaled * 255).astype(int)
    lines = ["P2", f"{side} {side}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in pixels)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    """Read an ASCII (P2) or binary (P5) PGM into a 2D uint8/uint16 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"P2":
        tokens = data.decode().split()
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        vals = np.array(tokens[4:4 + width * height], dtype=int)
        return vals.reshape(height, width)
    if data[:2] == b"P5":
        # header: magic, width, height, maxval, single whitespace, raster
        parts = data.split(maxsplit=4)
        width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
        dtype = np.uint8 if maxval < 256 else ">u2"
        raster = np.frombuffer(parts[4], dtype=dtype, count=width * height)
        return raster.reshape(height, width).astype(int)
    raise ValueError(f"{path}: not a PGM file")


def write_image_csv(path, image_flat: np.ndarray) -> None:
    """Full-precision flat CSV dump, one value per line."""
    np.savetxt(path, np.asarray(image_flat, dtype=float), fmt="%.17g")


def read_image_csv(path) -> np.ndarray:
    return np.loadtxt(path, dtype=float).ravel()


def _format_float(x: float) -> str:
    return f"{x:.17g}"


def write_trace_csv(path, rows) -> None:
    """Write trace rows under the versioned schema.

    ``rows`` is an iterable of objects with attributes matching
    ``TRACE_HEADER`` fields.
    """
    buf = io.StringIO()
    buf.write(TRACE_MAGIC + "\n")
    buf.write(TRACE_HEADER + "\n")
    for r in rows:
        buf.write(",".join([
            str(int(r.k)), str(int(r.level)), r.step_type,
            _format_float(r.f), _format_float(r.grad_norm),
            _format_float(r.step_size), str(int(r.grad_evals)),
            _format_float(r.wall_s),
        ]) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def read_trace_csv(path) -> dict:
    """Read a trace written by :func:`write_trace_csv` into column arrays.

    Rejects files whose version line or header deviates from the schema.
    """
    with open(path) as fh:
        magic = fh.readline().rstrip("\n")
        if magic != TRACE_MAGIC:
            raise ValueError(f"{path}: unknown trace version line {magic!r}")
        header = fh.readline().rstrip("\n")
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: trace header {header!r} does not match schema")
        reader = csv.reader(fh)
        raw = list(reader)
    cols = {name: [] for name in TRACE_HEADER.split(",")}
    for rec in raw:
        if not rec:
            continue
        for name, val in zip(cols, rec):
            cols[name].append(val)
    return {
        "k": np.array(cols["k"], dtype=int),
        "level": np.array(cols["level"], dtype=int),
        "step_type": np.array(cols["step_type"], dtype=object),
        "f": np.array(cols["f"], dtype=float),
        "grad_norm": np.array(cols["grad_norm"], dtype=float),
        "step_size": np.array(cols["step_size"], dtype=float),
        "grad_evals": np.array(cols["grad_evals"], dtype=int),
        "wall_s": np.array(cols["wall_s"], dtype=float),
    }


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_summary_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
