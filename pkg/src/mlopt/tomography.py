"""Self-contained discrete tomography problems.

A deterministic parallel-beam projector (exact ray/pixel intersection
lengths), piecewise-constant phantoms, a least-squares data term smoothed
by a pseudo-Huber total-variation penalty, and a Kullback-Leibler data fit
on a thresholded nonnegative domain.

Geometry conventions: pixels are unit squares, pixel (row, col) covers
``[col, col+1] x [row, row+1]`` with the row axis pointing down; the
detector has ``side`` bins of unit width centered on the image, so every
ray crosses the image square and no projector row is empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .hierarchy import DomainError, Objective
from .transfer import Grid2D, TransferPair, operator_norm_2


# ---------------------------------------------------------------------------
# projector

@dataclass(frozen=True)
class Projector:
    """Sparse parallel-beam projection matrix with its geometry."""

    matrix: sparse.csr_array
    angles: np.ndarray
    det_count: int
    grid: Grid2D

    @property
    def n_rays(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_angles(self) -> int:
        return self.angles.size


def trace_ray(side: int, theta: float, offset: float):
    """Exact intersection lengths of one ray with a ``side x side`` grid.

    The ray passes through ``center + offset * (-sin, cos)`` with direction
    ``(cos, sin)``.  Returns ``(pixel_indices, lengths)`` with row-major
    pixel indexing.
    """
    ux, uy = math.cos(theta), math.sin(theta)
    px = side / 2.0 - offset * math.sin(theta)
    py = side / 2.0 + offset * math.cos(theta)

    t_lo, t_hi = -np.inf, np.inf
    for p, u in ((px, ux), (py, uy)):
        if abs(u) < 1e-14:
            if not 0.0 <= p <= side:
                return np.array([], dtype=int), np.array([])
        else:
            t0, t1 = (0.0 - p) / u, (side - p) / u
            t_lo = max(t_lo, min(t0, t1))
            t_hi = min(t_hi, max(t0, t1))
    if not t_hi > t_lo:
        return np.array([], dtype=int), np.array([])

    ts = [np.array([t_lo, t_hi])]
    for p, u in ((px, ux), (py, uy)):
        if abs(u) >= 1e-14:
            c_lo = p + t_lo * u
            c_hi = p + t_hi * u
            lines = np.arange(math.ceil(min(c_lo, c_hi) - 1e-12),
                              math.floor(max(c_lo, c_hi) + 1e-12) + 1.0)
            ts.append((lines - p) / u)
    ts = np.unique(np.concatenate(ts))
    ts = ts[(ts >= t_lo - 1e-12) & (ts <= t_hi + 1e-12)]
    lengths = np.diff(ts)
    keep = lengths > 1e-12
    if not np.any(keep):
        return np.array([], dtype=int), np.array([])
    mids = 0.5 * (ts[:-1] + ts[1:])[keep]
    lengths = lengths[keep]
    cols = np.clip(np.floor(px + mids * ux).astype(int), 0, side - 1)
    rows = np.clip(np.floor(py + mids * uy).astype(int), 0, side - 1)
    return rows * side + cols, lengths


def build_projector(grid: Grid2D, undersampling: float = 0.10, seed: int = 0,
                    angles: np.ndarray | None = None) -> Projector:
    """Deterministic sparse projector for ``grid``.

    ``det_count = side`` and the angle count is chosen so the ray count is
    ``round(undersampling * n)``.  A seeded global rotation of the
    (equidistant) angle set avoids exactly axis-aligned degeneracies.
    Passing ``angles`` reuses an existing scan geometry, which is how the
    coarser levels of a hierarchy share the finest level's scan.
    """
    side = grid.side
    if angles is None:
        if not 0.0 < undersampling <= 1.0:
            raise ValueError(f"undersampling must lie in (0, 1], got {undersampling}")
        n_angles = max(1, round(undersampling * grid.n / side))
        rng = np.random.default_rng(seed)
        shift = rng.uniform(0.05, 0.95) * math.pi / n_angles
        angles = shift + np.arange(n_angles) * math.pi / n_angles
    angles = np.asarray(angles, dtype=float)

    offsets = np.arange(side) - (side - 1) / 2.0
    rows_idx, cols_idx, vals = [], [], []
    ray = 0
    for theta in angles:
        for off in offsets:
            pix, lens = trace_ray(side, theta, off)
            if pix.size == 0:
                raise ValueError(
                    f"ray (theta={theta:.4f}, offset={off:.1f}) misses the "
                    "image; detector geometry is degenerate")
            rows_idx.append(np.full(pix.size, ray))
            cols_idx.append(pix)
            vals.append(lens)
            ray += 1
    mat = sparse.coo_array(
        (np.concatenate(vals), (np.concatenate(rows_idx), np.concatenate(cols_idx))),
        shape=(ray, grid.n)).tocsr()
    mat.sum_duplicates()
    return Projector(matrix=mat, angles=angles, det_count=side, grid=grid)


# ---------------------------------------------------------------------------
# image gradient operator

def forward_difference_operator(grid: Grid2D) -> sparse.csr_array:
    """Stacked forward differences (x block then y block), shape (2n, n).

    The last column/row of each direction gets a zero row, so constants
    map to zero and ``||D||_2**2 <= 8``.
    """
    side = grid.side
    n = grid.n
    idx = np.arange(n).reshape(side, side)

    rows, cols, vals = [], [], []
    # x direction: u[r, c+1] - u[r, c]
    src = idx[:, :-1].ravel()
    dst = idx[:, 1:].ravel()
    rows.extend([src, src])
    cols.extend([dst, src])
    vals.extend([np.ones(src.size), -np.ones(src.size)])
    # y direction: u[r+1, c] - u[r, c], rows offset by n
    src = idx[:-1, :].ravel()
    dst = idx[1:, :].ravel()
    rows.extend([src + n, src + n])
    cols.extend([dst, src])
    vals.extend([np.ones(src.size), -np.ones(src.size)])

    return sparse.coo_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * n, n)).tocsr()


# ---------------------------------------------------------------------------
# pseudo-Huber and the smoothed-TV objective

@dataclass(frozen=True)
class HuberParams:
    lam: float = 0.1
    rho: float = 0.01

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.rho <= 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")


def pseudo_huber(a: np.ndarray, rho: float) -> float:
    """Sum of ``sqrt(rho^2 + a_i^2) - rho`` (smooth absolute value)."""
    return float(np.sum(np.hypot(rho, a) - rho))


def pseudo_huber_derivative(a: np.ndarray, rho: float) -> np.ndarray:
    """Componentwise derivative ``a / sqrt(rho^2 + a^2)``."""
    return a / np.hypot(rho, a)


def pseudo_huber_curvature(a: np.ndarray, rho: float) -> np.ndarray:
    """Componentwise second derivative ``rho^2 / (rho^2 + a^2)^(3/2)``."""
    return rho ** 2 / np.hypot(rho, a) ** 3


class HuberTVObjective(Objective):
    """Least-squares data fit plus pseudo-Huber-smoothed total variation:
    ``0.5 ||A y - b||^2 + lam * sum(sqrt(rho^2 + (D y)^2) - rho)``."""

    has_hessian_vec = True

    def __init__(self, projector: Projector, diff_op: sparse.csr_array,
                 params: HuberParams, data: np.ndarray):
        self.projector = projector
        self.diff_op = diff_op
        self.params = params
        self.data = np.asarray(data, dtype=float)
        self.dim = projector.matrix.shape[1]
        if self.data.shape != (projector.n_rays,):
            raise ValueError(
                f"data has shape {self.data.shape}, expected ({projector.n_rays},)")

    def value(self, y):
        r = self.projector.matrix @ y - self.data
        return float(0.5 * r @ r
                     + self.params.lam * pseudo_huber(self.diff_op @ y,
                                                      self.params.rho))

    def gradient(self, y):
        a_mat = self.projector.matrix
        r = a_mat @ y - self.data
        edges = pseudo_huber_derivative(self.diff_op @ y, self.params.rho)
        return a_mat.T @ r + self.params.lam * (self.diff_op.T @ edges)

    def hessian_vec(self, y, v):
        a_mat = self.projector.matrix
        curv = pseudo_huber_curvature(self.diff_op @ y, self.params.rho)
        return a_mat.T @ (a_mat @ v) \
            + self.params.lam * (self.diff_op.T @ (curv * (self.diff_op @ v)))


# ---------------------------------------------------------------------------
# Kullback-Leibler objective

@dataclass(frozen=True)
class KLParams:
    beta_dom: float = 1e-6

    def __post_init__(self):
        if self.beta_dom <= 0:
            raise ValueError(f"beta_dom must be > 0, got {self.beta_dom}")


class KLObjective(Objective):
    """Generalized Kullback-Leibler fit ``sum(Ay log(Ay/b) - Ay + b)``.

    Defined for ``A y > 0``; iterates are meant to live on the thresholded
    domain ``y >= beta_dom`` enforced through the box machinery.  No
    Hessian-vector capability is advertised.
    """

    def __init__(self, projector: Projector, params: KLParams,
                 data: np.ndarray):
        self.projector = projector
        self.params = params
        self.data = np.asarray(data, dtype=float)
        self.dim = projector.matrix.shape[1]
        if self.data.shape != (projector.n_rays,):
            raise ValueError(
                f"data has shape {self.data.shape}, expected ({projector.n_rays},)")
        if np.any(self.data <= 0):
            raise ValueError("KL data must be strictly positive")

    def _forward(self, y):
        z = self.projector.matrix @ y
        if np.any(z <= 0.0):
            raise DomainError("projection has nonpositive components; "
                              "iterate left the KL domain")
        return z

    def value(self, y):
        z = self._forward(y)
        return float(np.sum(z * np.log(z / self.data) - z + self.data))

    def gradient(self, y):
        z = self._forward(y)
        return self.projector.matrix.T @ np.log(z / self.data)


# ---------------------------------------------------------------------------
# Lipschitz constants

def lipschitz_estimate(projector: Projector, diff_op: sparse.csr_array,
                       params: HuberParams, pair: TransferPair | None = None,
                       norm_tol: float = 1e-8) -> tuple[float, float]:
    """Gradient-Lipschitz estimate ``||A|| ||A.T|| + 8 lam / rho`` for the
    smoothed-TV objective at this level.

    When ``pair`` transfers this level down to the next coarser one, the
    second return value bounds the projected-Hessian surrogate built from
    this level: ``omega**2`` times the estimate.  Otherwise it is NaN.
    """
    a_mat = projector.matrix
    a_norm = operator_norm_2(a_mat, tol=norm_tol)
    at_norm = operator_norm_2(a_mat.T, tol=norm_tol)
    l_psi = a_norm * at_norm + 8.0 * params.lam / params.rho
    l_phi = pair.omega ** 2 * l_psi if pair is not None else math.nan
    return float(l_psi), float(l_phi)


# ---------------------------------------------------------------------------
# phantoms

def _paint_disks(img: np.ndarray, disks) -> None:
    side = img.shape[0]
    centers_y, centers_x = np.meshgrid(
        (np.arange(side) + 0.5) / side, (np.arange(side) + 0.5) / side,
        indexing="ij")
    for cx, cy, radius, value in disks:
        mask = (centers_x - cx) ** 2 + (centers_y - cy) ** 2 <= radius ** 2
        img[mask] = value


def make_phantom(grid: Grid2D, kind: str = "disks", seed: int = 0) -> np.ndarray:
    """Deterministic piecewise-constant phantom with values in [0, 1].

    ``disks``: seeded circles on a zero background.  ``bone_like``: a
    high-intensity ring with seeded interior blobs and voids.
    """
    side = grid.side
    rng = np.random.default_rng(seed)
    img = np.zeros((side, side))
    if kind == "disks":
        n_disks = 5
        for _ in range(n_disks):
            cx, cy = rng.uniform(0.2, 0.8, size=2)
            radius = rng.uniform(0.08, 0.22)
            value = rng.uniform(0.3, 1.0)
            _paint_disks(img, [(cx, cy, radius, value)])
    elif kind == "bone_like":
        centers_y, centers_x = np.meshgrid(
            (np.arange(side) + 0.5) / side, (np.arange(side) + 0.5) / side,
            indexing="ij")
        rr = (centers_x - 0.5) ** 2 + (centers_y - 0.5) ** 2
        img[rr <= 0.42 ** 2] = 0.95          # cortical shell
        img[rr <= 0.33 ** 2] = 0.15          # medullary interior
        blobs = [(rng.uniform(0.32, 0.68), rng.uniform(0.32, 0.68),
                  rng.uniform(0.03, 0.08), rng.uniform(0.35, 0.65))
                 for _ in range(6)]
        _paint_disks(img, blobs)
        voids = [(rng.uniform(0.4, 0.6), rng.uniform(0.4, 0.6),
                  rng.uniform(0.02, 0.04), 0.02)
                 for _ in range(2)]
        _paint_disks(img, voids)
    else:
        raise ValueError(f"unknown phantom kind {kind!r}")
    return img.ravel()


def downsample_image(image_flat: np.ndarray, side: int) -> np.ndarray:
    """2x2 block mean onto the next coarser grid (flat in, flat out)."""
    if side % 2 != 0:
        raise ValueError(f"cannot downsample odd side {side}")
    img = np.asarray(image_flat, dtype=float).reshape(side, side)
    coarse = 0.25 * (img[0::2, 0::2] + img[1::2, 0::2]
                     + img[0::2, 1::2] + img[1::2, 1::2])
    return coarse.ravel()
