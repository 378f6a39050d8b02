"""Assemble multi-resolution problem instances for the solver and CLI.

Every level owns an independently discretized objective on its own grid;
the finest level fixes the scan geometry (angles) and the ground-truth
image, coarser levels rediscretize with block-averaged phantoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .coarse import Box
from .hierarchy import Level, ObjectiveHierarchy, QuadraticObjective
from .tomography import (HuberParams, HuberTVObjective, KLObjective, KLParams,
                         Projector, build_projector, downsample_image,
                         forward_difference_operator, make_phantom)
from .transfer import Grid2D, TransferPair, build_full_weighting

PROBLEM_KINDS = ("huber_tv", "kl_box", "quadratic_test")


@dataclass
class ProblemBundle:
    """A ready-to-solve problem: hierarchy, bounds, start point, artifacts."""

    kind: str
    hierarchy: ObjectiveHierarchy
    y0: np.ndarray
    box: Box | None = None
    grids: list[Grid2D] = field(default_factory=list)
    phantom: np.ndarray | None = None
    projectors: list[Projector] = field(default_factory=list)
    diff_ops: list[sparse.csr_array] = field(default_factory=list)
    huber_params: HuberParams | None = None

    @property
    def side(self) -> int:
        return self.grids[0].side

    def transfer_pairs(self) -> list[TransferPair]:
        return self.hierarchy.transfer


def _level_grids(side: int, levels: int) -> list[Grid2D]:
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    grids = [Grid2D(side)]
    for _ in range(levels - 1):
        grids.append(grids[-1].coarsen())
    return grids


def _phantom_stack(grids, kind, seed):
    """Finest phantom plus block-mean downsamples for each coarser grid."""
    images = [make_phantom(grids[0], kind=kind, seed=seed)]
    for grid in grids[:-1]:
        images.append(downsample_image(images[-1], grid.side))
    return images


def build_huber_problem(side: int = 64, levels: int = 3,
                        undersampling: float = 0.10, lam: float = 0.1,
                        rho: float = 0.01, phantom_kind: str = "disks",
                        seed: int = 0) -> ProblemBundle:
    """Smoothed-TV tomography at ``levels`` resolutions sharing one scan."""
    grids = _level_grids(side, levels)
    params = HuberParams(lam=lam, rho=rho)
    phantoms = _phantom_stack(grids, phantom_kind, seed)

    finest = build_projector(grids[0], undersampling=undersampling, seed=seed)
    projectors = [finest]
    for grid in grids[1:]:
        projectors.append(build_projector(grid, angles=finest.angles))

    level_objs, diff_ops = [], []
    for grid, proj, image in zip(grids, projectors, phantoms):
        diff = forward_difference_operator(grid)
        diff_ops.append(diff)
        data = proj.matrix @ image
        level_objs.append(Level(HuberTVObjective(proj, diff, params, data),
                                grid=grid))
    transfer = [build_full_weighting(g) for g in grids[:-1]]
    hierarchy = ObjectiveHierarchy(level_objs, transfer)
    return ProblemBundle(kind="huber_tv", hierarchy=hierarchy,
                         y0=np.zeros(grids[0].n), grids=grids,
                         phantom=phantoms[0], projectors=projectors,
                         diff_ops=diff_ops, huber_params=params)


def build_kl_problem(side: int = 64, levels: int = 3,
                     undersampling: float = 0.10, beta_dom: float = 1e-6,
                     background: float = 0.1, phantom_kind: str = "disks",
                     seed: int = 0) -> ProblemBundle:
    """KL tomography on the thresholded domain ``y >= beta_dom``.

    The ground-truth intensity is floored at ``background`` (an emission
    backdrop well above the domain threshold), which keeps every data
    entry strictly positive and the fit's curvature bounded; the floor of
    the feasible set stays at ``beta_dom``.
    """
    grids = _level_grids(side, levels)
    params = KLParams(beta_dom=beta_dom)
    floor = max(background, beta_dom)
    finest_image = np.clip(make_phantom(grids[0], kind=phantom_kind,
                                        seed=seed), floor, 1.0)
    phantoms = [finest_image]
    for grid in grids[:-1]:
        phantoms.append(downsample_image(phantoms[-1], grid.side))

    finest = build_projector(grids[0], undersampling=undersampling, seed=seed)
    projectors = [finest]
    for grid in grids[1:]:
        projectors.append(build_projector(grid, angles=finest.angles))

    level_objs = []
    for grid, proj, image in zip(grids, projectors, phantoms):
        data = proj.matrix @ image
        level_objs.append(Level(KLObjective(proj, params, data), grid=grid))
    transfer = [build_full_weighting(g) for g in grids[:-1]]
    hierarchy = ObjectiveHierarchy(level_objs, transfer)

    n = grids[0].n
    box = Box.lower_bounded(n, beta_dom)
    # feasible flat start matching the total measured mass
    ray_sums = projectors[0].matrix @ np.ones(n)
    mass = float(np.sum(level_objs[0].objective.data) / np.sum(ray_sums))
    y0 = np.full(n, max(beta_dom, mass))
    return ProblemBundle(kind="kl_box", hierarchy=hierarchy, y0=y0, box=box,
                         grids=grids, phantom=phantoms[0],
                         projectors=projectors)


def build_quadratic_problem(side: int = 32, levels: int = 3, mu: float = 1.0,
                            gamma: float = 1.0, phantom_kind: str = "disks",
                            seed: int = 0) -> ProblemBundle:
    """Strongly convex image-smoothing quadratic:
    ``mu/2 ||y - target||^2 + gamma/2 ||D y||^2`` per level."""
    if mu <= 0 or gamma < 0:
        raise ValueError("quadratic test problem needs mu > 0 and gamma >= 0")
    grids = _level_grids(side, levels)
    targets = _phantom_stack(grids, phantom_kind, seed)

    level_objs, diff_ops = [], []
    for grid, target in zip(grids, targets):
        diff = forward_difference_operator(grid)
        diff_ops.append(diff)
        hess = (mu * sparse.eye_array(grid.n) + gamma * (diff.T @ diff)).tocsr()
        obj = QuadraticObjective(hess, lin=-mu * target,
                                 const=0.5 * mu * float(target @ target))
        level_objs.append(Level(obj, grid=grid))
    transfer = [build_full_weighting(g) for g in grids[:-1]]
    hierarchy = ObjectiveHierarchy(level_objs, transfer)
    return ProblemBundle(kind="quadratic_test", hierarchy=hierarchy,
                         y0=np.zeros(grids[0].n), grids=grids,
                         phantom=targets[0], diff_ops=diff_ops)


def build_problem(kind: str, **kwargs) -> ProblemBundle:
    if kind == "huber_tv":
        return build_huber_problem(**kwargs)
    if kind == "kl_box":
        return build_kl_problem(**kwargs)
    if kind == "quadratic_test":
        return build_quadratic_problem(**kwargs)
    raise ValueError(f"unknown problem kind {kind!r}")
