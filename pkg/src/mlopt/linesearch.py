"""Backtracking, strong-Wolfe, and projected-arc line searches.

All searches count one trial per candidate point and report the accepted
step through :class:`StepResult`.  Evaluation handles are plain callables,
so callers can route them through hierarchy counters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACCEPTED = "accepted"
MAX_TRIALS = "max_trials_exceeded"
BRACKET_FAILED = "bracket_failed"
NO_PROGRESS = "no_progress"


@dataclass(frozen=True)
class LineSearchConfig:
    """Parameters shared by the searches.

    ``rho1`` is the sufficient-decrease slope (the role some references
    call c1); ``c2`` the curvature constant used only by the Wolfe search;
    ``beta`` the backtracking factor; ``alpha0`` the initial (and maximal)
    trial step.
    """

    rho1: float = 1e-4
    c2: float = 0.9
    beta: float = 0.5
    alpha0: float = 1.0
    max_trials: int = 50

    def __post_init__(self):
        if not 0.0 < self.rho1 < 0.5:
            raise ValueError(f"rho1 must lie in (0, 0.5), got {self.rho1}")
        if not self.rho1 < self.c2 < 1.0:
            raise ValueError(f"c2 must lie in (rho1, 1), got {self.c2}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.alpha0 > 0.0:
            raise ValueError(f"alpha0 must be positive, got {self.alpha0}")
        if self.max_trials < 1:
            raise ValueError(f"max_trials must be >= 1, got {self.max_trials}")


@dataclass
class StepResult:
    alpha: float
    trials: int
    f_new: float
    flag: str
    y_new: np.ndarray | None = field(default=None, repr=False)
    grad_new: np.ndarray | None = field(default=None, repr=False)

    @property
    def accepted(self) -> bool:
        return self.flag == ACCEPTED


def armijo_backtracking(f_eval, y: np.ndarray, d: np.ndarray,
                        g_dot_d: float, cfg: LineSearchConfig,
                        f0: float | None = None) -> StepResult:
    """Backtrack from ``alpha0`` until the sufficient-decrease condition
    ``f(y + a d) <= f(y) + rho1 * a * g_dot_d`` holds.

    ``g_dot_d`` must be negative (descent direction) and equal
    ``<grad f(y), d>``.
    """
    if not g_dot_d < 0.0:
        raise ValueError(f"descent direction required, got slope {g_dot_d:g}")
    if f0 is None:
        f0 = f_eval(y)
    alpha = cfg.alpha0
    f_new = f0
    for trial in range(1, cfg.max_trials + 1):
        y_new = y + alpha * d
        f_new = f_eval(y_new)
        if f_new <= f0 + cfg.rho1 * alpha * g_dot_d:
            return StepResult(alpha=alpha, trials=trial, f_new=f_new,
                              flag=ACCEPTED, y_new=y_new)
        alpha *= cfg.beta
    return StepResult(alpha=alpha / cfg.beta, trials=cfg.max_trials,
                      f_new=f_new, flag=MAX_TRIALS, y_new=None)


def wolfe_search(f_eval, g_eval, y: np.ndarray, d: np.ndarray,
                 cfg: LineSearchConfig, f0: float | None = None,
                 g_dot_d: float | None = None) -> StepResult:
    """Strong-Wolfe search by bracketing plus bisection zoom.

    Trials never exceed ``alpha0`` (it doubles as the step cap).  When the
    curvature condition cannot be met inside (0, alpha0] the best
    sufficient-decrease point found is returned under ``BRACKET_FAILED``
    so callers can still take a safeguarded descent step.
    """
    if g_dot_d is None:
        g_dot_d = float(g_eval(y) @ d)
    if not g_dot_d < 0.0:
        raise ValueError(f"descent direction required, got slope {g_dot_d:g}")
    if f0 is None:
        f0 = f_eval(y)

    def probe(alpha):
        y_a = y + alpha * d
        f_a = f_eval(y_a)
        g_a = g_eval(y_a)
        return y_a, f_a, g_a, float(g_a @ d)

    def result(alpha, trials, f_a, y_a, g_a, flag):
        return StepResult(alpha=alpha, trials=trials, f_new=f_a, flag=flag,
                          y_new=y_a, grad_new=g_a)

    trials = 1
    alpha = cfg.alpha0
    y_a, f_a, g_a, slope_a = probe(alpha)
    armijo_ok = f_a <= f0 + cfg.rho1 * alpha * g_dot_d
    if armijo_ok and abs(slope_a) <= cfg.c2 * abs(g_dot_d):
        return result(alpha, trials, f_a, y_a, g_a, ACCEPTED)

    if armijo_ok and slope_a < 0.0:
        # still descending at the cap: the minimizer lies beyond alpha0
        return result(alpha, trials, f_a, y_a, g_a, BRACKET_FAILED)

    # bracket: lo = best sufficient-decrease end, hi = other end
    if armijo_ok:
        a_lo, f_lo, slope_lo = alpha, f_a, slope_a
        a_hi, f_hi = 0.0, f0
        best = (alpha, f_a, y_a, g_a)
    else:
        a_lo, f_lo, slope_lo = 0.0, f0, g_dot_d
        a_hi, f_hi = alpha, f_a
        best = None

    while trials < cfg.max_trials:
        a_mid = 0.5 * (a_lo + a_hi)
        trials += 1
        y_m, f_m, g_m, slope_m = probe(a_mid)
        if f_m > f0 + cfg.rho1 * a_mid * g_dot_d or f_m >= f_lo:
            a_hi, f_hi = a_mid, f_m
        else:
            if abs(slope_m) <= cfg.c2 * abs(g_dot_d):
                return result(a_mid, trials, f_m, y_m, g_m, ACCEPTED)
            if slope_m * (a_hi - a_lo) >= 0.0:
                a_hi, f_hi = a_lo, f_lo
            a_lo, f_lo, slope_lo = a_mid, f_m, slope_m
            best = (a_mid, f_m, y_m, g_m)
        if a_hi == a_lo:
            break
    if best is not None:
        alpha, f_b, y_b, g_b = best
        return result(alpha, trials, f_b, y_b, g_b, MAX_TRIALS)
    return StepResult(alpha=0.0, trials=trials, f_new=f0, flag=MAX_TRIALS)


def projected_armijo_arc(f_eval, project, y: np.ndarray, d: np.ndarray,
                         grad: np.ndarray, cfg: LineSearchConfig,
                         f0: float | None = None) -> StepResult:
    """Sufficient-decrease search along the projection arc.

    Accepts the first ``a`` in the backtracking sequence with
    ``f(proj(y + a d)) <= f(y) + rho1 * <grad, proj(y + a d) - y>``.
    The returned point is always feasible.  If the projection pins the
    arc to ``y`` itself the search reports ``NO_PROGRESS``.
    """
    if f0 is None:
        f0 = f_eval(y)
    alpha = cfg.alpha0
    f_new = f0
    for trial in range(1, cfg.max_trials + 1):
        y_new = project(y + alpha * d)
        step = y_new - y
        if not np.any(step):
            # the whole arc projects back onto y (applies to every smaller
            # alpha as well, componentwise)
            return StepResult(alpha=0.0, trials=trial, f_new=f0,
                              flag=NO_PROGRESS, y_new=y)
        f_new = f_eval(y_new)
        if f_new <= f0 + cfg.rho1 * float(grad @ step):
            return StepResult(alpha=alpha, trials=trial, f_new=f_new,
                              flag=ACCEPTED, y_new=y_new)
        alpha *= cfg.beta
    return StepResult(alpha=alpha / cfg.beta, trials=cfg.max_trials,
                      f_new=f_new, flag=MAX_TRIALS, y_new=None)
