"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Criteria 11 and 12 are the desk-scale benchmark reproductions and
take a few seconds each; everything else is near-instant.
"""

import time

import numpy as np
import pytest
import scipy.sparse as sparse
from helpers import QuadraticFamily, interp1d_pair, spd_with_eigenvalues

from mlopt.coarse import Box, build_algebraic, build_geometric, coarse_box
from mlopt.hierarchy import Level, ObjectiveHierarchy, QuadraticObjective
from mlopt.linesearch import LineSearchConfig, armijo_backtracking
from mlopt.problems import (build_huber_problem, build_kl_problem,
                            build_quadratic_problem)
from mlopt.solver import SolverConfig, solve_multilevel
from mlopt.tomography import (HuberParams, build_projector,
                              forward_difference_operator,
                              lipschitz_estimate)
from mlopt.transfer import Grid2D, TransferPair


def report(num, name, detail):
    print(f"\n[criterion {num:02d}] PASS {name}: {detail}")


def make_symmetric_pair(n, coarse_n, rng):
    while True:
        p = rng.standard_normal((n, coarse_n))
        if np.linalg.matrix_rank(p) == coarse_n:
            break
    return TransferPair.from_matrices(sparse.csr_array(p.T),
                                      sparse.csr_array(p))


def armijo_config(**kwargs):
    defaults = dict(
        line_search_method="armijo",
        line_search=LineSearchConfig(rho1=0.25, c2=0.9, beta=0.5, alpha0=1.0),
        coarse_solver="exact_quadratic",
        kappa=0.47,
        epsilon=1e-3,
    )
    defaults.update(kwargs)
    return SolverConfig(**defaults)


def test_criterion_01_first_order_coherence():
    t0 = time.perf_counter()
    problems = [
        ("huber_tv", build_huber_problem(side=16, levels=3, seed=21)),
        ("kl_box", build_kl_problem(side=16, levels=3, seed=22)),
        ("quadratic", build_quadratic_problem(side=16, levels=3, seed=23)),
    ]
    rng = np.random.default_rng(100)
    worst = 0.0
    for trial in range(100):
        kind, bundle = problems[trial % 3]
        h = bundle.hierarchy
        ell = int(rng.integers(0, h.n_levels - 1))
        if kind == "kl_box":
            y = rng.uniform(0.5, 1.5, size=h.dim(ell))
        else:
            y = rng.standard_normal(h.dim(ell))
        grad = h.gradient(ell, y)
        model = build_geometric(h, ell, y, grad)
        restricted = h.pair(ell).restrict(grad)
        err = np.linalg.norm(model.gradient(model.anchor) - restricted) \
            / max(1.0, np.linalg.norm(restricted))
        worst = max(worst, err)
        assert err <= 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report(1, "first-order coherence",
           f"100 triples, max rel err {worst:.2e} (limit 1e-12), "
           f"{elapsed:.1f}s (limit 10s)")


def test_criterion_02_descent_inequality():
    rng = np.random.default_rng(200)
    worst_gap = -np.inf
    for trial in range(50):
        coarse_n = int(rng.integers(2, 65))
        n = 2 * coarse_n
        pair = make_symmetric_pair(n, coarse_n, rng)
        fine_h, _, _ = spd_with_eigenvalues(n, rng, 0.4, 2.5)
        coarse_h, _, _ = spd_with_eigenvalues(coarse_n, rng, 0.4, 2.5)
        h = ObjectiveHierarchy(
            [Level(QuadraticObjective(fine_h, rng.standard_normal(n))),
             Level(QuadraticObjective(coarse_h, rng.standard_normal(coarse_n)))],
            [pair])
        y = rng.standard_normal(n)
        grad = h.gradient(0, y)
        model = build_geometric(h, 0, y, grad)
        x_star = np.linalg.solve(coarse_h,
                                 coarse_h @ model.anchor - model.gradient(model.anchor))
        gap = model.value(x_star) - model.value(model.anchor)
        direction = pair.prolong(x_star - model.anchor)
        assert gap <= 1e-10
        assert grad @ direction <= gap + 1e-10
        worst_gap = max(worst_gap, grad @ direction - gap)
    report(2, "exact-coarse-solve descent inequality",
           f"50 instances, max slack {worst_gap:.2e} (limit 1e-10)")


def test_criterion_03_transferred_box_feasibility():
    rng = np.random.default_rng(300)
    violations = 0
    for trial in range(20):
        coarse_n = int(rng.integers(2, 8))
        n = int(rng.integers(2 * coarse_n, 4 * coarse_n))
        pair = make_symmetric_pair(n, coarse_n, rng)   # sign-mixed entries
        y = rng.uniform(-1.0, 1.0, size=n)
        lo = y - rng.uniform(0.05, 2.0, size=n)
        up = y + rng.uniform(0.05, 2.0, size=n)
        box = Box(lo, up)
        cbox = coarse_box(pair, y, box)
        anchor = pair.restrict(y)
        lo_s = np.where(np.isfinite(cbox.lower), cbox.lower, -4.0)
        up_s = np.where(np.isfinite(cbox.upper), cbox.upper, 4.0)
        xs = rng.uniform(lo_s, up_s, size=(1000, coarse_n))
        ys = y + (xs - anchor) @ pair.prolongation.T.toarray()
        violations += int(np.sum(ys < lo[None, :] - 1e-12))
        violations += int(np.sum(ys > up[None, :] + 1e-12))
    assert violations == 0
    report(3, "transferred-box feasibility",
           "20 sign-mixed instances x 1000 samples, 0 violations beyond 1e-12")


def test_criterion_04_backtracking_lower_bound():
    rng = np.random.default_rng(400)
    trials = 0
    while trials < 500:
        dim = int(rng.integers(2, 10))
        eigs = rng.uniform(0.2, 5.0, size=dim)
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        hess = (q * eigs) @ q.T
        lipschitz = float(np.max(eigs))
        f = lambda z: float(0.5 * z @ (hess @ z))
        y = rng.standard_normal(dim)
        grad = hess @ y
        d = -grad + 0.3 * rng.standard_normal(dim)
        gdd = float(grad @ d)
        if gdd >= -1e-12:
            continue
        cfg = LineSearchConfig(rho1=float(rng.uniform(0.05, 0.45)),
                               beta=float(rng.uniform(0.3, 0.8)),
                               alpha0=float(rng.choice([0.5, 1.0, 2.0])))
        res = armijo_backtracking(f, y, d, gdd, cfg)
        assert res.accepted
        bound = min(cfg.alpha0, 2 * cfg.beta * (cfg.rho1 - 1.0) * gdd
                    / (lipschitz * float(d @ d)))
        assert res.alpha >= bound - 1e-12
        trials += 1
    report(4, "backtracking step lower bound",
           f"{trials} trials, accepted step always >= min(alpha0, "
           "2*beta*(rho1-1)*g.d/(M*||d||^2))")


def _family_runs(n_instances=20, max_outer=100, seed0=500, grad_tol=1e-13):
    rho1, beta, alpha0, kappa = 0.25, 0.5, 1.0, 0.47
    runs = []
    for i in range(n_instances):
        fam = QuadraticFamily(n=16, levels=3, seed=seed0 + i)
        cfg = armijo_config(levels=3, max_outer=max_outer, grad_tol=grad_tol,
                            kappa=kappa)
        res = solve_multilevel(fam.hierarchy, fam.y0.copy(), cfg)
        consts = fam.theorem_constants(rho1, beta, alpha0, kappa)
        runs.append((fam, res, consts))
    return runs


@pytest.fixture(scope="module")
def family_runs():
    return _family_runs()


def test_criterion_05_sufficient_decrease(family_runs):
    checked = 0
    coarse_checked = 0
    for fam, res, (fine_const, coarse_const, lam) in family_runs:
        rows = res.trace.finest()
        f_prev = rows[0].f   # initial-state row
        floor = 1e3 * np.finfo(float).eps * max(1.0, f_prev)
        for row in rows[1:]:
            gap_estimate = f_prev - fam.f_star
            if gap_estimate <= floor:
                break
            decrease = f_prev - row.f
            if row.step_type == "coarse":
                coarse_checked += 1
                assert decrease >= coarse_const * row.grad_norm ** 2 * (1 - 1e-9)
            assert decrease >= lam * row.grad_norm ** 2 * (1 - 1e-9)
            checked += 1
            f_prev = row.f
    assert coarse_checked > 0
    report(5, "per-iteration sufficient decrease",
           f"{checked} iterations over 20 instances "
           f"({coarse_checked} coarse), 0 violations")


def test_criterion_06_linear_rate(family_runs):
    rho1, beta, alpha0, kappa = 0.25, 0.5, 1.0, 0.47
    fitted = []
    for fam, res, (_, _, lam) in family_runs:
        rate = 1.0 - 2.0 * fam.m[0] * lam
        assert 0.0 < rate < 1.0
        f0 = fam.hierarchy.levels[0].objective.value(fam.y0)
        gap0 = f0 - fam.f_star
        floor = 1e3 * np.finfo(float).eps * max(1.0, f0)
        gaps = []
        for k, row in enumerate(res.trace.finest()[1:], start=1):
            gap = row.f - fam.f_star
            if gap <= floor:
                break
            assert gap <= rate ** k * gap0 * (1 + 1e-9)
            gaps.append(gap)
        if len(gaps) >= 5:
            ks = np.arange(1, len(gaps) + 1)
            slope = np.polyfit(ks, np.log(gaps), 1)[0]
            fitted.append(np.exp(slope))
    assert fitted and max(fitted) < 1.0
    report(6, "linear rate",
           f"pointwise bound held on all instances; fitted contraction "
           f"factors in [{min(fitted):.3f}, {max(fitted):.3f}] (all < 1)")


def test_criterion_07_finitely_many_coarse_steps():
    runs = _family_runs(n_instances=20, max_outer=400, seed0=700,
                        grad_tol=1e-12)
    total_coarse = 0
    for fam, res, (_, _, lam) in runs:
        eps = 1e-3
        floor = eps / fam.omega
        rows = res.trace.finest()
        below = [i for i, r in enumerate(rows) if r.grad_norm <= floor]
        assert below, "run never reached the small-gradient regime"
        assert all(r.step_type == "fine" for r in rows[below[0]:])
        f0 = fam.hierarchy.levels[0].objective.value(fam.y0)
        bound = (fam.omega / eps) ** 2 * fam.level_set_radius_sq(f0) \
            / lam ** 2 - 2.0
        n_coarse = sum(1 for r in rows if r.step_type == "coarse")
        assert n_coarse <= bound
        total_coarse += n_coarse
    report(7, "finitely many coarse corrections",
           f"20 runs: no coarse step at/after the epsilon/omega gradient "
           f"floor; counts (total {total_coarse}) within the lemma bound")


def test_criterion_08_derivative_correctness():
    bundles = [
        ("huber_tv", build_huber_problem(side=8, levels=2, seed=81)),
        ("kl_box", build_kl_problem(side=8, levels=2, seed=82)),
        ("quadratic", build_quadratic_problem(side=8, levels=2, seed=83)),
    ]
    rng = np.random.default_rng(800)
    worst_g, worst_h = 0.0, 0.0
    for kind, bundle in bundles:
        obj = bundle.hierarchy.levels[0].objective
        dim = obj.dim
        for _ in range(20):
            if kind == "kl_box":
                y = rng.uniform(0.5, 1.5, size=dim)
            else:
                y = rng.standard_normal(dim)
            grad = obj.gradient(y)
            fd = np.zeros(dim)
            for i in range(dim):
                step = 1e-6 * max(1.0, abs(y[i]))
                up = y.copy(); up[i] += step
                dn = y.copy(); dn[i] -= step
                fd[i] = (obj.value(up) - obj.value(dn)) / (2 * step)
            err = np.linalg.norm(grad - fd) / max(1.0, np.linalg.norm(grad))
            worst_g = max(worst_g, err)
            assert err <= 1e-5
            if obj.has_hessian_vec:
                v = rng.standard_normal(dim)
                hv = obj.hessian_vec(y, v)
                eps = 1e-6
                fdh = (obj.gradient(y + eps * v)
                       - obj.gradient(y - eps * v)) / (2 * eps)
                herr = np.linalg.norm(hv - fdh) / max(1.0, np.linalg.norm(hv))
                worst_h = max(worst_h, herr)
                assert herr <= 1e-4
    report(8, "derivative correctness",
           f"gradients: max rel err {worst_g:.2e} (limit 1e-5); "
           f"Hessian-vector: {worst_h:.2e} (limit 1e-4)")


def test_criterion_09_surrogate_equivalence():
    rng = np.random.default_rng(900)
    worst_argmin, worst_const = 0.0, 0.0
    for trial in range(20):
        coarse_n = int(rng.integers(3, 9))
        n = 2 * coarse_n + int(rng.integers(0, 5))
        pair = make_symmetric_pair(n, coarse_n, rng)
        fine_h, _, _ = spd_with_eigenvalues(n, rng, 1.0, 3.0)
        fine = QuadraticObjective(fine_h, rng.standard_normal(n))
        coarse_h = pair.restriction.toarray() @ fine_h \
            @ pair.prolongation.toarray()
        coarse = QuadraticObjective(coarse_h, rng.standard_normal(coarse_n))
        h = ObjectiveHierarchy([Level(fine), Level(coarse)], [pair])
        y = rng.standard_normal(n)
        grad = h.gradient(0, y)
        geo = build_geometric(h, 0, y, grad)
        alg = build_algebraic(h, 0, y, grad)
        geo_min = np.linalg.solve(coarse_h, coarse_h @ geo.anchor
                                  - geo.gradient(geo.anchor))
        alg_min = np.linalg.solve(coarse_h, coarse_h @ alg.anchor
                                  - alg.restricted_grad)
        d_argmin = float(np.max(np.abs(geo_min - alg_min)))
        worst_argmin = max(worst_argmin, d_argmin)
        assert d_argmin <= 1e-8
        probes = rng.standard_normal((10, coarse_n))
        diffs = np.array([geo.value(x) - alg.value(x) for x in probes])
        spread = float(np.ptp(diffs))
        worst_const = max(worst_const, spread)
        assert spread <= 1e-8 * max(1.0, float(np.max(np.abs(diffs))))
    report(9, "geometric/algebraic surrogate equivalence",
           f"20 instances: argmin gap <= {worst_argmin:.2e}, value-offset "
           f"spread <= {worst_const:.2e} (limits 1e-8)")


def test_criterion_10_lipschitz_trend():
    t0 = time.perf_counter()
    params = HuberParams(lam=0.1, rho=0.01)
    grids = [Grid2D(128), Grid2D(64), Grid2D(32)]
    finest = build_projector(grids[0], undersampling=0.10, seed=1010)
    projectors = [finest] + [build_projector(g, angles=finest.angles)
                             for g in grids[1:]]
    values = []
    for grid, proj in zip(grids, projectors):
        diff = forward_difference_operator(grid)
        l_psi, _ = lipschitz_estimate(proj, diff, params)
        assert l_psi >= 80.0
        values.append(l_psi)
    ratios = [values[0] / values[1], values[1] / values[2]]  # 64->128, 32->64
    for ratio in ratios:
        assert 1.8 <= ratio <= 2.4
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    report(10, "gradient-Lipschitz growth trend",
           f"L = {values[2]:.1f}/{values[1]:.1f}/{values[0]:.1f} for sides "
           f"32/64/128 (floor 80), ratios {ratios[1]:.2f}, {ratios[0]:.2f} "
           f"in [1.8, 2.4]; {elapsed:.1f}s (limit 60s)")


def test_criterion_11_early_phase_benchmark():
    t0 = time.perf_counter()

    def run(solver_kwargs):
        bundle = build_huber_problem(side=64, levels=3, undersampling=0.10,
                                     seed=1234)
        cfg = SolverConfig(max_outer=200, grad_tol=1e-12, kappa=0.47,
                           epsilon=1e-3, **solver_kwargs)
        res = solve_multilevel(bundle.hierarchy, bundle.y0, cfg)
        f0 = bundle.hierarchy.levels[0].objective.value(bundle.y0)
        return f0, res

    runs = {
        "ml_geometric": run(dict(levels=3, fine_method="gradient_descent")),
        "gd": run(dict(levels=1, fine_method="gradient_descent")),
        "lbfgs": run(dict(levels=1, fine_method="lbfgs")),
    }
    f_best = min(res.f_final for _, res in runs.values())

    evals_to_target = {}
    for name, (f0, res) in runs.items():
        rows = res.trace.finest()
        fs = np.array([r.f for r in rows])
        assert np.all(np.diff(fs) <= 0.0), f"{name} trace is not monotone"
        denom = f0 - f_best
        hit = [r.grad_evals for r in rows if (r.f - f_best) / denom <= 1e-2]
        assert hit, f"{name} never reached relative objective 1e-2"
        evals_to_target[name] = hit[0]

    ml, gd, lbfgs = (evals_to_target["ml_geometric"], evals_to_target["gd"],
                     evals_to_target["lbfgs"])
    assert ml < gd
    assert ml <= 1.5 * lbfgs
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    report(11, "early-phase benchmark (smoothed-TV, side 64)",
           f"finest gradient evals to relative objective 1e-2: "
           f"multilevel {ml} < gd {gd}, and {ml} <= 1.5 x lbfgs ({lbfgs}); "
           f"{elapsed:.0f}s (limit 300s)")


def test_criterion_12_constrained_kl_run():
    t0 = time.perf_counter()
    bundle = build_kl_problem(side=64, levels=3, undersampling=0.10,
                              beta_dom=1e-6, seed=1234)
    feasible_flags = []
    cfg = SolverConfig(levels=3, fine_method="lbfgs", max_outer=600,
                       grad_tol=1e-5, kappa=0.47, epsilon=1e-3)
    res = solve_multilevel(
        bundle.hierarchy, bundle.y0, cfg, box=bundle.box,
        on_step=lambda k, y, f: feasible_flags.append(
            bundle.box.contains(y, tol=0.0)))
    assert all(feasible_flags) and feasible_flags
    assert res.proj_residual_final <= 1e-5
    fs = np.array([r.f for r in res.trace.finest()])
    assert np.all(np.diff(fs) <= 0.0)
    n_coarse = sum(1 for r in res.trace.finest() if r.step_type == "coarse")
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    report(12, "box-constrained KL run (side 64)",
           f"{len(feasible_flags)} feasible iterates, projected residual "
           f"{res.proj_residual_final:.2e} <= 1e-5, monotone trace, "
           f"{n_coarse} coarse steps; {elapsed:.0f}s (limit 300s)")
