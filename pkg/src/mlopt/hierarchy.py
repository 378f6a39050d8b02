"""Objectives discretized at multiple resolutions, with evaluation counters.

Each level owns an independently constructed problem instance (geometric
rediscretization); the hierarchy only wires levels together through
transfer pairs and tallies how often value/gradient/Hessian-vector
evaluations happen per level.  Counters are the canonical cost metric for
the benchmark harness.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .transfer import Grid2D, TransferPair


class DomainError(ValueError):
    """Objective evaluated outside its domain (e.g. nonpositive ray sums)."""


class CapabilityError(RuntimeError):
    """A problem was asked for a capability it does not advertise."""


class Objective:
    """Minimal interface for a single-level objective.

    Subclasses set ``dim`` and implement :meth:`value` and :meth:`gradient`;
    problems that can apply their Hessian matrix-free also implement
    :meth:`hessian_vec` and set ``has_hessian_vec``.
    """

    dim: int = 0
    has_hessian_vec: bool = False
    is_quadratic: bool = False

    def value(self, y: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian_vec(self, y: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise CapabilityError(
            f"{type(self).__name__} does not provide Hessian-vector products")


class QuadraticObjective(Objective):
    """f(y) = 1/2 y.T H y + b.T y + const for a symmetric PSD ``hess``."""

    has_hessian_vec = True
    is_quadratic = True

    def __init__(self, hess, lin=None, const: float = 0.0):
        self.hess = hess
        self.dim = hess.shape[0]
        self.lin = np.zeros(self.dim) if lin is None else np.asarray(lin, dtype=float)
        self.const = float(const)

    def value(self, y):
        return float(0.5 * y @ (self.hess @ y) + self.lin @ y + self.const)

    def gradient(self, y):
        return self.hess @ y + self.lin

    def hessian_vec(self, y, v):
        return self.hess @ v

    def minimizer(self) -> np.ndarray:
        """Exact stationary point (dense solve; intended for small tests)."""
        hess = self.hess.toarray() if hasattr(self.hess, "toarray") else np.asarray(self.hess)
        return np.linalg.solve(hess, -self.lin)


class EvalCounters:
    """Thread-safe tallies of objective evaluations at one level."""

    def __init__(self):
        self._lock = threading.Lock()
        self.values = 0
        self.gradients = 0
        self.hessian_vecs = 0

    def bump(self, kind: str) -> None:
        with self._lock:
            setattr(self, kind, getattr(self, kind) + 1)

    def snapshot(self) -> dict:
        with self._lock:
            return {"values": self.values, "gradients": self.gradients,
                    "hessian_vecs": self.hessian_vecs}


@dataclass
class Level:
    """One resolution level: an objective, optionally tied to a 2D grid."""

    objective: Objective
    grid: Grid2D | None = None

    def __post_init__(self):
        if self.grid is not None and self.grid.n != self.objective.dim:
            raise ValueError(
                f"grid with {self.grid.n} pixels does not match objective "
                f"dimension {self.objective.dim}")

    @property
    def dim(self) -> int:
        return self.objective.dim


class ObjectiveHierarchy:
    """Ordered stack of levels (0 = finest) joined by transfer pairs."""

    def __init__(self, levels: list[Level], transfer: list[TransferPair]):
        if len(levels) < 1:
            raise ValueError("hierarchy needs at least one level")
        if len(transfer) != len(levels) - 1:
            raise ValueError(
                f"{len(levels)} levels require {len(levels) - 1} transfer "
                f"pairs, got {len(transfer)}")
        for ell, pair in enumerate(transfer):
            if pair.fine_dim != levels[ell].dim or pair.coarse_dim != levels[ell + 1].dim:
                raise ValueError(
                    f"transfer pair {ell} maps {pair.fine_dim}->{pair.coarse_dim}, "
                    f"levels have dims {levels[ell].dim}->{levels[ell + 1].dim}")
            fine_grid, coarse_grid = levels[ell].grid, levels[ell + 1].grid
            if fine_grid is not None and coarse_grid is not None:
                if fine_grid.side != 2 * coarse_grid.side:
                    raise ValueError(
                        f"level {ell} side {fine_grid.side} must be twice "
                        f"level {ell + 1} side {coarse_grid.side}")
        self.levels = list(levels)
        self.transfer = list(transfer)
        self.counters = [EvalCounters() for _ in levels]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def dim(self, ell: int) -> int:
        return self.levels[ell].dim

    def pair(self, ell: int) -> TransferPair:
        """Transfer pair between level ``ell`` and level ``ell + 1``."""
        return self.transfer[ell]

    def _check(self, ell: int, y: np.ndarray) -> None:
        if not 0 <= ell < self.n_levels:
            raise ValueError(f"level {ell} outside 0..{self.n_levels - 1}")
        if y.shape != (self.dim(ell),):
            raise ValueError(
                f"level {ell} expects vectors of length {self.dim(ell)}, "
                f"got shape {y.shape}")

    def value(self, ell: int, y: np.ndarray) -> float:
        self._check(ell, y)
        self.counters[ell].bump("values")
        return self.levels[ell].objective.value(y)

    def gradient(self, ell: int, y: np.ndarray) -> np.ndarray:
        self._check(ell, y)
        self.counters[ell].bump("gradients")
        return self.levels[ell].objective.gradient(y)

    def hessian_vec(self, ell: int, y: np.ndarray, v: np.ndarray) -> np.ndarray:
        self._check(ell, y)
        if not self.levels[ell].objective.has_hessian_vec:
            raise CapabilityError(
                f"level {ell} objective does not provide Hessian-vector products")
        self.counters[ell].bump("hessian_vecs")
        return self.levels[ell].objective.hessian_vec(y, v)

    def grad_evals(self, ell: int = 0) -> int:
        return self.counters[ell].snapshot()["gradients"]

    def counter_snapshot(self) -> list[dict]:
        return [c.snapshot() for c in self.counters]


class LevelObjective(Objective):
    """Objective view of one hierarchy level; evaluations stay counted."""

    def __init__(self, hierarchy: ObjectiveHierarchy, ell: int):
        self.hierarchy = hierarchy
        self.ell = ell
        base = hierarchy.levels[ell].objective
        self.dim = base.dim
        self.has_hessian_vec = base.has_hessian_vec
        self.is_quadratic = base.is_quadratic

    def value(self, y):
        return self.hierarchy.value(self.ell, y)

    def gradient(self, y):
        return self.hierarchy.gradient(self.ell, y)

    def hessian_vec(self, y, v):
        return self.hierarchy.hessian_vec(self.ell, y, v)
