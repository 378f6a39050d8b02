"""Parse versioned benchmark trace files.

This package talks to the solver harness exclusively through its on-disk
formats; the trace schema is pinned here and files carrying any other
version line or header are refused.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

TRACE_MAGIC = "# mlopt-trace-v1"
TRACE_HEADER = "k,level,step_type,f,grad_norm,step_size,grad_evals,wall_s"


class TraceFormatError(ValueError):
    """Trace file does not carry the supported schema."""


@dataclass
class TraceFrame:
    """All rows of one trace plus its solver/problem labels."""

    label: str
    k: np.ndarray
    level: np.ndarray
    step_type: np.ndarray
    f: np.ndarray
    grad_norm: np.ndarray
    step_size: np.ndarray
    grad_evals: np.ndarray
    wall_s: np.ndarray
    problem: str = ""

    def __len__(self) -> int:
        return self.k.size

    def finest(self) -> "TraceFrame":
        """Rows of the finest level (the benchmark view)."""
        keep = self.level == 0
        return TraceFrame(label=self.label, problem=self.problem,
                          k=self.k[keep], level=self.level[keep],
                          step_type=self.step_type[keep], f=self.f[keep],
                          grad_norm=self.grad_norm[keep],
                          step_size=self.step_size[keep],
                          grad_evals=self.grad_evals[keep],
                          wall_s=self.wall_s[keep])


def load_trace(path, label: str | None = None, problem: str = "") -> TraceFrame:
    """Read one trace CSV, enforcing the version line and exact header."""
    with open(path) as fh:
        magic = fh.readline().rstrip("\n")
        if magic != TRACE_MAGIC:
            raise TraceFormatError(
                f"{path}: unsupported trace version line {magic!r} "
                f"(expected {TRACE_MAGIC!r})")
        header = fh.readline().rstrip("\n")
        if header != TRACE_HEADER:
            raise TraceFormatError(
                f"{path}: header {header!r} does not match the schema")
        records = [rec for rec in csv.reader(fh) if rec]
    if not records:
        raise TraceFormatError(f"{path}: trace contains no rows")
    cols = list(zip(*records))
    return TraceFrame(
        label=label or str(path),
        problem=problem,
        k=np.array(cols[0], dtype=int),
        level=np.array(cols[1], dtype=int),
        step_type=np.array(cols[2], dtype=object),
        f=np.array(cols[3], dtype=float),
        grad_norm=np.array(cols[4], dtype=float),
        step_size=np.array(cols[5], dtype=float),
        grad_evals=np.array(cols[6], dtype=int),
        wall_s=np.array(cols[7], dtype=float),
    )


def relative_objective(traces: list[TraceFrame], floor: float = 1e-16):
    """Cross-solver normalization: (f_k - f_best) / (f_first - f_best).

    ``f_best`` is the best finest-level value over all traces, so every
    curve starts at 1.0 and the winning run approaches zero (clipped at
    ``floor`` for log axes).  Returns ``{label: (k, wall_s, rel)}``.
    """
    if not traces:
        raise ValueError("need at least one trace")
    finest = [t.finest() for t in traces]
    for t in finest:
        if len(t) == 0:
            raise ValueError(f"{t.label}: no finest-level rows to plot")
    f_best = min(float(np.min(t.f)) for t in finest)
    out = {}
    for t in finest:
        denom = float(t.f[0]) - f_best
        if denom <= 0.0:
            rel = np.zeros_like(t.f)
            rel[0] = 1.0
        else:
            rel = (t.f - f_best) / denom
        out[t.label] = (t.k.copy(), t.wall_s.copy(),
                        np.maximum(rel, floor))
    return out
