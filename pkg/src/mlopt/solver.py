"""Two-level and recursive multilevel descent with coarse-grid corrections.

One outer iteration at a level either takes a *coarse correction* (build a
coarse surrogate, decrease it, prolongate the correction, step) or falls
back to *fine correction* iterations (gradient descent, projected gradient
descent, or L-BFGS at the finest level).  Gating conditions decide which
branch runs; every step at every level is recorded in a
:class:`ConvergenceTrace`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import linesearch as ls
from .coarse import (Box, build_algebraic, build_geometric, coarse_box,
                     correction_direction)
from .hierarchy import LevelObjective, Objective, ObjectiveHierarchy
from .transfer import TransferPair

STEP_COARSE = "coarse"
STEP_FINE = "fine"

STATUS_CONVERGED = "converged"
STATUS_MAX_OUTER = "max_outer"
STATUS_STALLED = "stalled"

FINE_METHODS = ("gradient_descent", "projected_gd", "lbfgs")
COARSE_MODELS = ("geometric", "algebraic")
COARSE_SOLVERS = ("auto", "exact_quadratic", "gradient_iterations")
LS_METHODS = ("wolfe", "armijo")


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the multilevel scheme.

    ``levels=1`` runs the configured fine method only (the single-level
    baselines); coarse corrections need ``levels >= 2``.  Schedules default
    to one outer iteration per coarse visit and ``2**level`` fine
    iterations at level ``level``.
    """

    levels: int = 2
    kappa: float = 0.47
    epsilon: float = 1e-3
    max_outer: int = 200
    grad_tol: float | None = None          # absolute; None = relative default
    grad_tol_rel: float = 1e-6
    fine_method: str = "gradient_descent"
    lbfgs_pairs: int = 3
    coarse_model: str = "geometric"
    coarse_solver: str = "auto"
    coarse_iters_per_level: tuple | None = None
    fine_steps_per_level: tuple | None = None
    constrained: bool = False
    line_search_method: str = "wolfe"
    line_search: ls.LineSearchConfig = field(
        default_factory=lambda: ls.LineSearchConfig(rho1=1e-4, c2=0.9,
                                                    beta=0.5, alpha0=1.0))
    arc_search: ls.LineSearchConfig = field(
        default_factory=lambda: ls.LineSearchConfig(rho1=1e-4, c2=0.9,
                                                    beta=0.8, alpha0=1.0))
    cg_tol: float = 1e-10
    cg_max_iter: int = 2000
    stall_tol: float = 1e-15

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.fine_method not in FINE_METHODS:
            raise ValueError(f"unknown fine_method {self.fine_method!r}")
        if self.coarse_model not in COARSE_MODELS:
            raise ValueError(f"unknown coarse_model {self.coarse_model!r}")
        if self.coarse_solver not in COARSE_SOLVERS:
            raise ValueError(f"unknown coarse_solver {self.coarse_solver!r}")
        if self.line_search_method not in LS_METHODS:
            raise ValueError(
                f"unknown line_search_method {self.line_search_method!r}")
        if self.lbfgs_pairs < 1:
            raise ValueError(f"lbfgs_pairs must be >= 1, got {self.lbfgs_pairs}")

    def coarse_iters(self, level: int) -> int:
        sched = self.coarse_iters_per_level
        if sched is None:
            return 1
        return int(sched[min(level, len(sched) - 1)])

    def fine_steps(self, level: int) -> int:
        sched = self.fine_steps_per_level
        if sched is None:
            return 2 ** level
        return int(sched[min(level, len(sched) - 1)])


@dataclass
class SolverState:
    y: np.ndarray
    k: int = 0
    coarse_steps_taken: int = 0
    fine_steps_taken: int = 0
    last_step_type: str | None = None


@dataclass
class TraceRow:
    k: int
    level: int
    step_type: str
    f: float
    grad_norm: float
    step_size: float
    grad_evals: int
    wall_s: float


class ConvergenceTrace:
    """Per-step records (all levels); the finest level is the benchmark view."""

    def __init__(self):
        self.rows: list[TraceRow] = []

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def finest(self) -> list[TraceRow]:
        return [r for r in self.rows if r.level == 0]

    def column(self, name: str, level: int | None = 0) -> np.ndarray:
        rows = self.rows if level is None \
            else [r for r in self.rows if r.level == level]
        return np.array([getattr(r, name) for r in rows])

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class SolveResult:
    y: np.ndarray
    trace: ConvergenceTrace
    state: SolverState
    status: str
    f_final: float
    grad_norm_final: float
    proj_residual_final: float | None
    summary: dict


def coarse_condition_unconstrained(grad_f: np.ndarray, pair: TransferPair,
                                   kappa: float, epsilon: float) -> bool:
    """Gate for coarse corrections: the gradient seen through the transfer
    must carry a ``kappa`` fraction of the full gradient and exceed
    ``epsilon``."""
    restricted = pair.prolongation.T @ grad_f
    rn = float(np.linalg.norm(restricted))
    gn = float(np.linalg.norm(grad_f))
    return rn >= kappa * gn and rn > epsilon


def projected_gradient_residual(y: np.ndarray, grad: np.ndarray,
                                box: Box) -> float:
    """Norm of the projected-gradient step; zero exactly at stationarity."""
    return float(np.linalg.norm(box.project(y - grad) - y))


def coarse_condition_box(y_k: np.ndarray, grad_f: np.ndarray,
                         pair: TransferPair, fine_box: Box, cbox: Box,
                         kappa: float,
                         anchor: np.ndarray | None = None) -> bool:
    """Constrained gate: compare projected-gradient residuals on the fine
    box and on the transferred coarse box.

    First-order coherence makes the coarse-model gradient at the anchor
    equal the restricted fine gradient, so no coarse evaluation is needed.
    """
    if anchor is None:
        anchor = pair.restrict(y_k)
    a_k = projected_gradient_residual(y_k, grad_f, fine_box)
    restricted = pair.restrict(grad_f)
    b_k = float(np.linalg.norm(cbox.project(anchor - restricted) - anchor))
    return b_k >= kappa * a_k


class LbfgsMemory:
    """Limited curvature history driving the two-loop recursion."""

    def __init__(self, pairs: int):
        self.pairs = pairs
        self.s: list[np.ndarray] = []
        self.t: list[np.ndarray] = []      # gradient differences
        self.rho: list[float] = []
        self.skipped = 0

    def update(self, s: np.ndarray, t: np.ndarray) -> bool:
        """Store a displacement/gradient-difference pair; pairs with a
        negligible curvature product are skipped."""
        sy = float(s @ t)
        if sy <= 1e-10 * np.linalg.norm(s) * np.linalg.norm(t):
            self.skipped += 1
            return False
        self.s.append(s)
        self.t.append(t)
        self.rho.append(1.0 / sy)
        if len(self.s) > self.pairs:
            self.s.pop(0)
            self.t.pop(0)
            self.rho.pop(0)
        return True

    def direction(self, grad: np.ndarray) -> np.ndarray:
        """Two-loop recursion: -H_approx @ grad with the usual scaled
        identity seed.  Empty memory gives steepest descent."""
        q = grad.copy()
        alphas = []
        for s, t, rho in zip(reversed(self.s), reversed(self.t),
                             reversed(self.rho)):
            a = rho * float(s @ q)
            q -= a * t
            alphas.append(a)
        if self.s:
            gamma = float(self.s[-1] @ self.t[-1]) / float(self.t[-1] @ self.t[-1])
            q *= gamma
        for (s, t, rho), a in zip(zip(self.s, self.t, self.rho),
                                  reversed(alphas)):
            b = rho * float(t @ q)
            q += (a - b) * s
        return -q


def minimize_quadratic_cg(objective: Objective, x0: np.ndarray,
                          grad0: np.ndarray | None = None,
                          tol: float = 1e-10, max_iter: int = 2000):
    """Minimize a quadratic objective by conjugate gradients.

    Runs on Hessian-vector products until the residual falls below ``tol``
    relative to the initial gradient.  Returns ``(x, converged)``.
    """
    g0 = objective.gradient(x0) if grad0 is None else grad0
    b = -g0
    bn = float(np.linalg.norm(b))
    if bn == 0.0:
        return x0.copy(), True
    x = np.zeros_like(x0)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    for _ in range(max_iter):
        hp = objective.hessian_vec(x0, p)
        php = float(p @ hp)
        if php <= 0.0:
            break  # numerically lost positive definiteness
        a = rs / php
        x += a * p
        r -= a * hp
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= tol * bn:
            return x0 + x, True
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x0 + x, False


class _Run:
    """Mutable context shared by all levels of one solve."""

    def __init__(self, hierarchy, config, fine_box, coarse_solve_fn):
        self.hierarchy = hierarchy
        self.config = config
        self.trace = ConvergenceTrace()
        self.fine_box = fine_box
        self.coarse_solve_fn = coarse_solve_fn
        self.t0 = time.perf_counter()
        self.k_outer = 0
        self.coarse_rejections = 0
        self.linesearch_failures = 0

    def wall(self) -> float:
        return time.perf_counter() - self.t0

    def record(self, level, step_type, f, grad_norm, step_size) -> None:
        self.trace.append(TraceRow(
            k=self.k_outer, level=level, step_type=step_type, f=float(f),
            grad_norm=float(grad_norm), step_size=float(step_size),
            grad_evals=self.hierarchy.grad_evals(0), wall_s=self.wall()))


def _line_search_unconstrained(run, objective, y, d, g, f_cur):
    """Shared Wolfe/backtracking dispatch; None when no decrease was found.

    A Wolfe search that hits its step cap while still descending is retried
    with a doubled cap (each call keeps its own ``alpha <= alpha0``
    contract); quasi-Newton directions can be short by orders of magnitude
    right after steep warm-up steps.
    """
    cfg = run.config
    g_dot_d = float(g @ d)
    if not g_dot_d < 0.0:
        return None
    if cfg.line_search_method == "armijo":
        res = ls.armijo_backtracking(objective.value, y, d, g_dot_d,
                                     cfg.line_search, f0=f_cur)
    else:
        ls_cfg = cfg.line_search
        res = ls.wolfe_search(objective.value, objective.gradient, y, d,
                              ls_cfg, f0=f_cur, g_dot_d=g_dot_d)
        expansions = 0
        while res.flag == ls.BRACKET_FAILED and expansions < 60 \
                and res.grad_new is not None \
                and float(res.grad_new @ d) < 0.0:
            ls_cfg = replace(ls_cfg, alpha0=2.0 * ls_cfg.alpha0)
            expansions += 1
            res = ls.wolfe_search(objective.value, objective.gradient, y, d,
                                  ls_cfg, f0=f_cur, g_dot_d=g_dot_d)
    if res.y_new is None or not res.f_new < f_cur:
        run.linesearch_failures += 1
        return None
    return res


def _fine_iteration(run, level, objective, y, f_cur, g, box, lbfgs_mem):
    """One fine-correction iteration.

    Returns ``(y, f, g_next_or_None, moved)`` where ``g_next`` reuses the
    line search's gradient at the accepted point when available.
    """
    gn = float(np.linalg.norm(g))
    cfg = run.config

    if box is not None:
        if lbfgs_mem is not None:
            d = lbfgs_mem.direction(g)
        else:
            d = -g
        res = ls.projected_armijo_arc(objective.value, box.project, y, d, g,
                                      cfg.arc_search, f0=f_cur)
        if lbfgs_mem is not None and (not res.accepted or not res.f_new < f_cur):
            # quasi-Newton arc failed: retry along the projected gradient
            res = ls.projected_armijo_arc(objective.value, box.project, y,
                                          -g, g, cfg.arc_search, f0=f_cur)
        if not res.accepted or not res.f_new < f_cur:
            if res.flag != ls.NO_PROGRESS:
                run.linesearch_failures += 1
            run.record(level, STEP_FINE, f_cur, gn, 0.0)
            return y, f_cur, g, False
        if lbfgs_mem is not None:
            g_new = objective.gradient(res.y_new)
            lbfgs_mem.update(res.y_new - y, g_new - g)
            run.record(level, STEP_FINE, res.f_new, gn, res.alpha)
            return res.y_new, res.f_new, g_new, True
        run.record(level, STEP_FINE, res.f_new, gn, res.alpha)
        return res.y_new, res.f_new, None, True

    if lbfgs_mem is not None:
        d = lbfgs_mem.direction(g)
        if not float(g @ d) < 0.0:  # safeguard against indefinite memory
            d = -g
    else:
        d = -g
    res = _line_search_unconstrained(run, objective, y, d, g, f_cur)
    if res is None:
        run.record(level, STEP_FINE, f_cur, gn, 0.0)
        return y, f_cur, g, False
    g_new = res.grad_new
    if lbfgs_mem is not None:
        if g_new is None:
            g_new = objective.gradient(res.y_new)
        lbfgs_mem.update(res.y_new - y, g_new - g)
    run.record(level, STEP_FINE, res.f_new, gn, res.alpha)
    return res.y_new, res.f_new, g_new, True


def _solve_coarse_model(run, level, model, anchor, cbox):
    """Decrease the coarse model living at ``level``.

    Quadratic models without bounds are solved exactly by CG; otherwise
    the configured number of outer iterations of this same scheme runs at
    ``level``, recursing deeper when its own gate fires.
    """
    cfg = run.config
    solver = cfg.coarse_solver
    if solver == "auto":
        solver = "exact_quadratic" if (model.is_quadratic and cbox is None) \
            else "gradient_iterations"
    if solver == "exact_quadratic" and cbox is None:
        if not model.is_quadratic:
            raise ValueError("exact_quadratic coarse solver requires a "
                             "quadratic coarse objective")
        x, _ = minimize_quadratic_cg(model, anchor, tol=cfg.cg_tol,
                                     max_iter=cfg.cg_max_iter)
        return x
    x = anchor.copy()
    f_x = None
    for _ in range(cfg.coarse_iters(level)):
        x, f_x, moved = _outer_iteration(run, level, model, x, f_x, cbox, None)
        if not moved:
            break
    return x


def _coarse_step(run, level, objective, y, f_cur, g, box):
    """Attempt one coarse correction; returns ``(y, f, moved)``."""
    cfg = run.config
    hierarchy = run.hierarchy
    pair = hierarchy.pair(level)
    anchor = pair.restrict(y)

    if cfg.coarse_model == "algebraic":
        model = build_algebraic(hierarchy, level, y, g)
    else:
        model = build_geometric(hierarchy, level, y, g)

    cbox = coarse_box(pair, y, box, anchor=anchor) if box is not None else None

    solve_fn = run.coarse_solve_fn or _solve_coarse_model
    x_plus = solve_fn(run, level + 1, model, anchor, cbox)

    if not model.value(x_plus) < model.value(anchor):
        run.coarse_rejections += 1
        return y, f_cur, False

    d = correction_direction(pair, x_plus, anchor)
    gn = float(np.linalg.norm(g))

    if box is not None:
        # unit step is feasible by the coarse-box construction; the
        # projection only sweeps up roundoff
        y_new = box.project(y + d)
        f_new = objective.value(y_new)
        if not f_new < f_cur:
            run.coarse_rejections += 1
            return y, f_cur, False
        run.record(level, STEP_COARSE, f_new, gn, 1.0)
        return y_new, f_new, True

    res = _line_search_unconstrained(run, objective, y, d, g, f_cur)
    if res is None:
        run.coarse_rejections += 1
        return y, f_cur, False
    run.record(level, STEP_COARSE, res.f_new, gn, res.alpha)
    return res.y_new, res.f_new, True


def _outer_iteration(run, level, objective, y, f_cur, box, lbfgs_mem,
                     g=None):
    """One outer iteration at ``level``: gate, then coarse or fine branch.

    At the finest level the branches are exclusive (a coarse correction is
    the whole iteration).  Inside recursive coarse visits a gated
    correction is followed by the level's smoothing schedule anyway; the
    visit's only contract is to decrease the surrogate, and cascading
    without smoothing would leave this level's own error components
    untouched.  Returns ``(y, f, moved)``.
    """
    cfg = run.config
    hierarchy = run.hierarchy
    if f_cur is None:
        f_cur = objective.value(y)
    if g is None:
        g = objective.gradient(y)

    take_coarse = False
    if level + 1 < min(cfg.levels, hierarchy.n_levels):
        pair = hierarchy.pair(level)
        if box is not None:
            anchor = pair.restrict(y)
            cbox_gate = coarse_box(pair, y, box, anchor=anchor)
            take_coarse = coarse_condition_box(y, g, pair, box, cbox_gate,
                                               cfg.kappa, anchor=anchor)
        else:
            take_coarse = coarse_condition_unconstrained(g, pair, cfg.kappa,
                                                         cfg.epsilon)

    moved_any = False
    g_next = g
    if take_coarse:
        y_new, f_new, moved = _coarse_step(run, level, objective, y, f_cur,
                                           g, box)
        if moved:
            if level == 0:
                return y_new, f_new, True
            y, f_cur, g_next = y_new, f_new, None
            moved_any = True
        # rejected coarse step: fall through to the fine branch

    for _ in range(cfg.fine_steps(level)):
        if g_next is None:
            g_next = objective.gradient(y)
        y, f_cur, g_next, moved = _fine_iteration(
            run, level, objective, y, f_cur, g_next, box, lbfgs_mem)
        moved_any = moved_any or moved
        if not moved:
            break
    return y, f_cur, moved_any


def solve_multilevel(hierarchy: ObjectiveHierarchy, y0: np.ndarray,
                     config: SolverConfig, box: Box | None = None,
                     on_step=None, coarse_solve_fn=None) -> SolveResult:
    """Run the multilevel scheme from ``y0`` on the finest level.

    ``box`` activates the constrained variant (projected fine steps, unit
    coarse steps through transferred bounds).  ``on_step(k_done, y, f)``
    fires after every finest-level outer iteration.  ``coarse_solve_fn``
    replaces the coarse-model solve (testing/extension hook with the same
    signature as the internal one).
    """
    if config.levels > hierarchy.n_levels:
        raise ValueError(
            f"config asks for {config.levels} levels but the hierarchy "
            f"has {hierarchy.n_levels}")
    if box is not None and not box.contains(y0):
        raise ValueError("initial point violates the box constraints")
    if config.fine_method == "projected_gd" and box is None:
        raise ValueError("projected_gd requires box constraints")
    if box is not None and config.fine_method == "gradient_descent":
        raise ValueError("gradient_descent ignores box constraints; use "
                         "projected_gd or lbfgs")

    objective = LevelObjective(hierarchy, 0)
    run = _Run(hierarchy, config, box, coarse_solve_fn)
    state = SolverState(y=np.array(y0, dtype=float, copy=True))
    lbfgs_mem = LbfgsMemory(config.lbfgs_pairs) \
        if config.fine_method == "lbfgs" else None

    f_cur = objective.value(state.y)
    g = objective.gradient(state.y)
    g0_norm = float(np.linalg.norm(g))
    if box is not None:
        res0 = projected_gradient_residual(state.y, g, box)
        tol = config.grad_tol if config.grad_tol is not None \
            else config.grad_tol_rel * max(res0, 1e-30)
    else:
        tol = config.grad_tol if config.grad_tol is not None \
            else config.grad_tol_rel * max(g0_norm, 1e-30)

    # row k=0 is the initial state; row k marks the state after the k-th
    # outer iteration (relative-objective curves then start at exactly 1)
    run.record(0, STEP_FINE, f_cur, g0_norm, 0.0)

    status = STATUS_MAX_OUTER
    proj_residual = None

    for k in range(config.max_outer):
        run.k_outer = k + 1
        state.k = k
        if g is None:
            g = objective.gradient(state.y)
        grad_norm = float(np.linalg.norm(g))
        if box is not None:
            proj_residual = projected_gradient_residual(state.y, g, box)
            if proj_residual <= tol:
                status = STATUS_CONVERGED
                break
        elif grad_norm <= tol:
            status = STATUS_CONVERGED
            break

        y_new, f_new, moved = _outer_iteration(
            run, 0, objective, state.y, f_cur, box, lbfgs_mem, g=g)
        # a level-0 coarse row, when taken, is always the last row recorded
        last = run.trace.rows[-1] if run.trace.rows else None
        if last is not None and last.k == k + 1 and last.level == 0 \
                and last.step_type == STEP_COARSE:
            state.coarse_steps_taken += 1
            state.last_step_type = STEP_COARSE
        elif moved:
            state.fine_steps_taken += 1
            state.last_step_type = STEP_FINE

        decrease = f_cur - f_new
        stall_floor = config.stall_tol * abs(f_cur)
        state.y = y_new
        f_cur = f_new
        g = None  # next iteration re-evaluates at the new point
        if on_step is not None:
            on_step(k + 1, state.y, f_cur)
        if not moved or decrease <= stall_floor:
            state.k = k + 1
            status = STATUS_STALLED
            break
    else:
        state.k = config.max_outer

    g_final = objective.gradient(state.y)
    grad_norm = float(np.linalg.norm(g_final))
    if box is not None:
        proj_residual = projected_gradient_residual(state.y, g_final, box)
        if proj_residual <= tol and status != STATUS_CONVERGED:
            status = STATUS_CONVERGED
    elif grad_norm <= tol and status != STATUS_CONVERGED:
        status = STATUS_CONVERGED

    summary = {
        "status": status,
        "outer_iterations": state.k,
        "coarse_steps": state.coarse_steps_taken,
        "fine_steps": state.fine_steps_taken,
        "coarse_rejections": run.coarse_rejections,
        "linesearch_failures": run.linesearch_failures,
        "f_final": f_cur,
        "grad_norm_final": grad_norm,
        "proj_residual_final": proj_residual,
        "grad_tol": tol,
        "wall_s": run.wall(),
        "eval_counters": hierarchy.counter_snapshot(),
    }
    return SolveResult(y=state.y, trace=run.trace, state=state, status=status,
                       f_final=f_cur, grad_norm_final=grad_norm,
                       proj_residual_final=proj_residual, summary=summary)
