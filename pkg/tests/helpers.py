"""Shared fixtures-in-code: transfer pairs with factor one and quadratic
families whose convergence constants are exactly computable."""

import numpy as np
import scipy.sparse as sparse

from mlopt.hierarchy import Level, ObjectiveHierarchy, QuadraticObjective
from mlopt.transfer import TransferPair


def interp1d_pair(n: int) -> TransferPair:
    """1D linear-interpolation prolongation (columns [.5, 1, .5]) with
    R = P.T, so the Galerkin factor is one."""
    if n % 2 != 0:
        raise ValueError("even size required")
    half = n // 2
    rows, cols, vals = [], [], []
    for j in range(half):
        center = 2 * j
        for off, w in ((-1, 0.5), (0, 1.0), (1, 0.5)):
            i = center + off
            if 0 <= i < n:
                rows.append(i)
                cols.append(j)
                vals.append(w)
    p = sparse.coo_array((vals, (rows, cols)), shape=(n, half)).tocsr()
    return TransferPair.from_matrices(p.T.tocsr(), p)


def spd_with_eigenvalues(dim, rng, lo, hi):
    """Random SPD matrix with spectrum drawn in [lo, hi]; returns
    (matrix, min_eig, max_eig) with the extremes attained exactly."""
    eigs = rng.uniform(lo, hi, size=dim)
    eigs[0], eigs[-1] = lo, hi
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    mat = (q * eigs) @ q.T
    mat = 0.5 * (mat + mat.T)
    return mat, float(lo), float(hi)


class QuadraticFamily:
    """Multi-resolution random quadratics with known constants.

    Spectra are placed in ranges that keep every analysis constant sane:
    coarse strong convexity below one, Lipschitz constants in (1, 2), and
    gradient-norm contraction for all unit-capped descent steps.
    """

    def __init__(self, n=16, levels=3, seed=0, eig_lo=0.5, eig_hi=1.7):
        rng = np.random.default_rng(seed)
        dims = [n // (2 ** ell) for ell in range(levels)]
        objective_levels = []
        self.m = []
        self.M = []
        for ell, dim in enumerate(dims):
            hess, m_eig, big_eig = spd_with_eigenvalues(dim, rng, eig_lo, eig_hi)
            # finest level centered at the origin: f* = 0 exactly, so f can
            # be driven to machine level without cancellation noise; coarse
            # linear terms stay random to keep the model shifts nontrivial
            lin = None if ell == 0 else rng.standard_normal(dim)
            objective_levels.append(Level(QuadraticObjective(hess, lin)))
            self.m.append(m_eig)
            self.M.append(big_eig)
        pairs = [interp1d_pair(dim) for dim in dims[:-1]]
        self.hierarchy = ObjectiveHierarchy(objective_levels, pairs)
        self.dims = dims
        self.omega = pairs[0].omega if pairs else 1.0
        self.y_star = np.zeros(dims[0])
        self.f_star = 0.0
        self.y0 = self.y_star + rng.standard_normal(dims[0])

    def theorem_constants(self, rho1, beta, alpha0, kappa):
        """(fine-step constant, coarse-step constant, their min)."""
        m_f, big_f = self.m[0], self.M[0]
        m_g, big_g = self.m[1], self.M[1]
        fine_const = rho1 * min(alpha0, 2 * beta * (1 - rho1) / big_f)
        coarse_const = rho1 * beta * (m_g ** 3) * (kappa ** 2) / (
            big_f * big_g ** 2 * self.omega ** 2)
        return fine_const, coarse_const, min(fine_const, coarse_const)

    def level_set_radius_sq(self, f0: float) -> float:
        """max ||y - y*||^2 over {f <= f0}, exact for quadratics."""
        return 2.0 * (f0 - self.f_star) / self.m[0]
