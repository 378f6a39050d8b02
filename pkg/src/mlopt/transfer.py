"""Restriction/prolongation operators between square 2D grid levels.

The operators form a Galerkin-coupled pair ``R = c * P.T``.  The standard
construction is full weighting for the restriction together with
``P = 4 R.T`` for the prolongation, which gives ``c = 1/4``.  Custom pairs
(for example ``R = P.T`` with ``c = 1``) can be built from explicit
matrices with :meth:`TransferPair.from_matrices`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

# Start vector seed for power iteration.  Fixed so that operator norms, and
# everything derived from them (omega, Lipschitz tables), are reproducible.
POWER_ITERATION_SEED = 20240601

# Maximum allowed entrywise residual of R - c * P.T.
GALERKIN_TOL = 1e-12


class TransferError(ValueError):
    """Invalid grid geometry or mismatched operator dimensions."""


@dataclass(frozen=True)
class Grid2D:
    """Square pixel grid with ``n = side**2`` unknowns."""

    side: int

    def __post_init__(self):
        if self.side < 1:
            raise TransferError(f"grid side must be positive, got {self.side}")

    @property
    def n(self) -> int:
        return self.side * self.side

    def coarsen(self) -> "Grid2D":
        """Grid with half the side length (vertex-centered coarsening)."""
        if self.side % 2 != 0:
            raise TransferError(f"cannot coarsen odd side {self.side}")
        if self.side < 4:
            raise TransferError(f"side {self.side} too small to coarsen (need >= 4)")
        return Grid2D(self.side // 2)


def operator_norm_2(mat, tol: float = 1e-10, max_iter: int = 1000,
                    seed: int = POWER_ITERATION_SEED) -> float:
    """Spectral norm of a (sparse) matrix by power iteration on M.T @ M.

    Deterministic for a fixed ``seed``.  If the Rayleigh quotient has not
    stabilised to relative tolerance ``tol`` after ``max_iter`` sweeps, the
    best estimate is returned and a ``RuntimeWarning`` is issued.
    """
    n_cols = mat.shape[1]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n_cols)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    for _ in range(max_iter):
        w = mat.T @ (mat @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            raise ValueError("operator_norm_2 requires a nonzero operator")
        v = w / lam
        if abs(lam - lam_prev) <= tol * lam:
            return float(np.sqrt(lam))
        lam_prev = lam
    warnings.warn(
        f"power iteration did not converge to tol={tol:g} in {max_iter} sweeps; "
        f"returning best estimate {np.sqrt(lam_prev):.6e}",
        RuntimeWarning,
    )
    return float(np.sqrt(lam_prev))


@dataclass(frozen=True)
class TransferPair:
    """Galerkin-coupled restriction/prolongation pair between two levels.

    Attributes
    ----------
    restriction : csr_array, shape (N, n)
        Fine-to-coarse map.
    prolongation : csr_array, shape (n, N)
        Coarse-to-fine map, full column rank.
    galerkin_factor : float
        Scalar ``c`` with ``R = c * P.T`` entrywise.
    omega : float
        ``max(||R||_2, ||P||_2)``, cached at construction.
    p_inf_norm : float
        ``||P||_inf`` (maximum absolute row sum), used for box transfer.
    """

    restriction: sparse.csr_array
    prolongation: sparse.csr_array
    galerkin_factor: float
    omega: float = field(compare=False)
    p_inf_norm: float = field(compare=False)

    @property
    def fine_dim(self) -> int:
        return self.restriction.shape[1]

    @property
    def coarse_dim(self) -> int:
        return self.restriction.shape[0]

    def restrict(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.fine_dim,):
            raise TransferError(
                f"restrict expects a fine vector of length {self.fine_dim}, "
                f"got shape {v.shape}")
        return self.restriction @ v

    def prolong(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.coarse_dim,):
            raise TransferError(
                f"prolong expects a coarse vector of length {self.coarse_dim}, "
                f"got shape {x.shape}")
        return self.prolongation @ x

    def galerkin_residual(self) -> float:
        """Entrywise max of ``R - c * P.T``."""
        diff = self.restriction - (self.prolongation.T * self.galerkin_factor).tocsr()
        return 0.0 if diff.nnz == 0 else float(np.max(np.abs(diff.data)))

    @classmethod
    def from_matrices(cls, restriction, prolongation,
                      galerkin_factor: float | None = None,
                      norm_tol: float = 1e-12) -> "TransferPair":
        """Build a pair from explicit matrices, validating the coupling.

        ``galerkin_factor`` is fitted by least squares when not given.
        """
        R = sparse.csr_array(restriction)
        P = sparse.csr_array(prolongation)
        if R.shape != P.shape[::-1]:
            raise TransferError(
                f"restriction {R.shape} and prolongation {P.shape} are not "
                "transpose-compatible")
        if galerkin_factor is None:
            pt = P.T.tocsr()
            denom = float(pt.multiply(pt).sum())
            if denom == 0.0:
                raise TransferError("prolongation is identically zero")
            galerkin_factor = float(R.multiply(pt).sum() / denom)
        omega = max(operator_norm_2(R, tol=norm_tol),
                    operator_norm_2(P, tol=norm_tol))
        p_inf = float(np.max(np.abs(P).sum(axis=1))) if P.nnz else 0.0
        pair = cls(restriction=R, prolongation=P,
                   galerkin_factor=float(galerkin_factor),
                   omega=omega, p_inf_norm=p_inf)
        resid = pair.galerkin_residual()
        if resid > GALERKIN_TOL:
            raise TransferError(
                f"Galerkin residual {resid:.3e} exceeds {GALERKIN_TOL:g}; "
                "operators are not coupled by R = c * P.T")
        return pair


def build_full_weighting(fine: Grid2D) -> TransferPair:
    """Full-weighting restriction with ``P = 4 R.T`` between ``fine`` and
    the next coarser grid.

    Coarse points sit at even fine indices (vertex-centered).  The 3x3
    stencil (1/16)[1 2 1; 2 4 2; 1 2 1] is clamped at grid borders
    (out-of-range indices are replicated onto the boundary), so every
    restriction row sums to one and constants are preserved.
    """
    if fine.side % 2 != 0:
        raise TransferError(f"full weighting requires an even side, got {fine.side}")
    if fine.side < 4:
        raise TransferError(f"full weighting requires side >= 4, got {fine.side}")
    coarse = fine.coarsen()
    s, big = coarse.side, fine.side

    ci, cj = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    rows = (ci * s + cj).ravel()
    w1d = np.array([1.0, 2.0, 1.0]) / 4.0

    row_idx, col_idx, vals = [], [], []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            fi = np.clip(2 * ci + di, 0, big - 1)
            fj = np.clip(2 * cj + dj, 0, big - 1)
            row_idx.append(rows)
            col_idx.append((fi * big + fj).ravel())
            vals.append(np.full(rows.size, w1d[di + 1] * w1d[dj + 1]))

    R = sparse.coo_array(
        (np.concatenate(vals), (np.concatenate(row_idx), np.concatenate(col_idx))),
        shape=(coarse.n, fine.n)).tocsr()
    R.sum_duplicates()
    P = sparse.csr_array(R.T * 4.0)
    return TransferPair.from_matrices(R, P, galerkin_factor=0.25)
