"""Coarse surrogate models and box-constraint transfer.

Two surrogates are provided for a fine objective ``f`` at the current
iterate ``y_k`` with anchor ``x_k = R @ y_k``:

* the *geometric* model: the independently discretized coarse objective
  ``g`` plus a linear shift so the surrogate's gradient at the anchor
  equals the restricted fine gradient (first-order coherence);
* the *algebraic* model: a quadratic built from the restricted fine
  gradient and the Galerkin-projected fine Hessian, applied matrix-free.

Both act as regular :class:`~mlopt.hierarchy.Objective` instances on the
coarse level, so the solver can recurse through them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hierarchy import LevelObjective, Objective, ObjectiveHierarchy
from .transfer import TransferPair


@dataclass(frozen=True)
class Box:
    """Componentwise bounds ``lower <= y <= upper`` (entries may be +-inf)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if lo.shape != up.shape:
            raise ValueError(f"bound shapes differ: {lo.shape} vs {up.shape}")
        if np.any(lo > up):
            raise ValueError("box has lower > upper in some component")

    @classmethod
    def unbounded(cls, dim: int) -> "Box":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @classmethod
    def lower_bounded(cls, dim: int, lower: float) -> "Box":
        return cls(np.full(dim, float(lower)), np.full(dim, np.inf))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def project(self, y: np.ndarray) -> np.ndarray:
        return np.clip(y, self.lower, self.upper)

    def contains(self, y: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(y >= self.lower - tol) and np.all(y <= self.upper + tol))


class GeometricCoarseModel(Objective):
    """Coarse objective plus the linear shift enforcing coherence.

    ``value(x) = g(x) + <shift, x - anchor>`` where
    ``shift = R grad_f - grad_g(anchor)``.  At the anchor the model's
    gradient equals the restricted fine gradient exactly.
    """

    def __init__(self, base: Objective, pair: TransferPair,
                 anchor: np.ndarray, restricted_grad: np.ndarray,
                 shift: np.ndarray):
        self.base = base
        self.pair = pair
        self.anchor = anchor
        self.restricted_grad = restricted_grad
        self.shift = shift
        self.dim = base.dim
        self.has_hessian_vec = base.has_hessian_vec
        self.is_quadratic = base.is_quadratic

    def value(self, x):
        return self.base.value(x) + float(self.shift @ (x - self.anchor))

    def gradient(self, x):
        return self.base.gradient(x) + self.shift

    def hessian_vec(self, x, v):
        return self.base.hessian_vec(x, v)


class AlgebraicCoarseModel(Objective):
    """Quadratic surrogate from the Galerkin-projected fine Hessian.

    The operator ``q(w) = R (hess_f(y_k) @ (P w))`` is never materialized;
    every application costs one fine-level Hessian-vector product.
    """

    is_quadratic = True
    has_hessian_vec = True

    def __init__(self, fine: Objective, pair: TransferPair,
                 y_k: np.ndarray, anchor: np.ndarray,
                 restricted_grad: np.ndarray):
        self.fine = fine
        self.pair = pair
        self.y_k = y_k
        self.anchor = anchor
        self.restricted_grad = restricted_grad
        self.dim = pair.coarse_dim

    def apply_projected_hessian(self, w: np.ndarray) -> np.ndarray:
        return self.pair.restrict(
            self.fine.hessian_vec(self.y_k, self.pair.prolong(w)))

    def value(self, x):
        d = x - self.anchor
        return float(self.restricted_grad @ d
                     + 0.5 * d @ self.apply_projected_hessian(d))

    def gradient(self, x):
        # symmetric quadratic term under the Galerkin coupling
        return self.restricted_grad + self.apply_projected_hessian(x - self.anchor)

    def hessian_vec(self, x, v):
        return self.apply_projected_hessian(v)


def build_geometric(hierarchy: ObjectiveHierarchy, ell: int, y_k: np.ndarray,
                    grad_f: np.ndarray) -> GeometricCoarseModel:
    """Geometric coarse model of level ``ell`` at iterate ``y_k``.

    ``grad_f`` must be the level-``ell`` gradient at ``y_k``; exactly one
    coarse gradient evaluation is spent on the shift.
    """
    pair = hierarchy.pair(ell)
    base = LevelObjective(hierarchy, ell + 1)
    anchor = pair.restrict(y_k)
    restricted = pair.restrict(grad_f)
    shift = restricted - base.gradient(anchor)
    return GeometricCoarseModel(base=base, pair=pair, anchor=anchor,
                                restricted_grad=restricted, shift=shift)


def build_algebraic(hierarchy: ObjectiveHierarchy, ell: int, y_k: np.ndarray,
                    grad_f: np.ndarray) -> AlgebraicCoarseModel:
    """Algebraic coarse model of level ``ell`` at ``y_k`` (needs fine
    Hessian-vector products; raises CapabilityError otherwise)."""
    pair = hierarchy.pair(ell)
    fine = LevelObjective(hierarchy, ell)
    if not fine.has_hessian_vec:
        fine.hessian_vec(y_k, y_k)  # raises CapabilityError with context
    anchor = pair.restrict(y_k)
    return AlgebraicCoarseModel(fine=fine, pair=pair, y_k=y_k, anchor=anchor,
                                restricted_grad=pair.restrict(grad_f))


def bregman_divergence(objective: Objective, x: np.ndarray,
                       anchor: np.ndarray) -> float:
    """g(x) - g(anchor) - <grad_g(anchor), x - anchor>; >= 0 for convex g."""
    return float(objective.value(x) - objective.value(anchor)
                 - objective.gradient(anchor) @ (x - anchor))


def coarse_box(pair: TransferPair, y_k: np.ndarray, box: Box,
               anchor: np.ndarray | None = None) -> Box:
    """Coarse-level bounds whose prolongated corrections stay feasible.

    For every coarse ``x`` in the returned box, ``y_k + P (x - anchor)``
    lies in the fine box.  Negative prolongation entries are handled by
    the sign-split max/min over the rows touching each column.
    """
    if not box.contains(y_k):
        raise ValueError("coarse_box requires a feasible fine iterate")
    if anchor is None:
        anchor = pair.restrict(y_k)
    csc = pair.prolongation.tocsc()
    inv_inf = 1.0 / pair.p_inf_norm
    below = box.lower - y_k   # <= 0, may be -inf
    above = y_k - box.upper   # <= 0, may be -inf
    n_coarse = pair.coarse_dim
    lower = np.empty(n_coarse)
    upper = np.empty(n_coarse)
    indptr, indices, data = csc.indptr, csc.indices, csc.data
    for j in range(n_coarse):
        rows = indices[indptr[j]:indptr[j + 1]]
        vals = data[indptr[j]:indptr[j + 1]]
        pos = rows[vals > 0]
        neg = rows[vals < 0]
        if pos.size == 0 and neg.size == 0:
            # column never touches the fine grid: unconstrained coordinate
            lower[j] = -np.inf
            upper[j] = np.inf
            continue
        lo_terms = []
        hi_terms = []
        if pos.size:
            lo_terms.append(np.max(below[pos]))
            hi_terms.append(np.min(-above[pos]))
        if neg.size:
            lo_terms.append(np.max(above[neg]))
            hi_terms.append(np.min(-below[neg]))
        lower[j] = anchor[j] + inv_inf * max(lo_terms)
        upper[j] = anchor[j] + inv_inf * min(hi_terms)
    return Box(lower, upper)


def correction_direction(pair: TransferPair, x_plus: np.ndarray,
                         anchor: np.ndarray) -> np.ndarray:
    """Fine-grid correction ``P (x_plus - anchor)``."""
    if x_plus.shape != anchor.shape:
        raise ValueError(
            f"coarse point shape {x_plus.shape} does not match anchor "
            f"shape {anchor.shape}")
    return pair.prolong(x_plus - anchor)
