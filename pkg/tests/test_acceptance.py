"""End-to-end acceptance checks at desk scale (evaluation grid K = 20,000,
sample budgets m <= 2,000, 10-20 trials).  Each test runs one criterion,
prints a single PASS/FAIL verdict line (visible with `pytest -s`), and then
asserts it.  Expected wall times are enforced with generous caps."""

from __future__ import annotations

import math
import time

import numpy as np
import scipy.linalg

from hdpoly.harness import (
    ExperimentConfig,
    emit,
    geometric_stats,
    run_experiment,
    stats_by_step,
)
from hdpoly.multi_index import (
    CoefVector,
    IndexSet,
    hyperbolic_cross_anchored,
    reduced_margin,
    total_degree_set,
)
from hdpoly.oracles import (
    best_n_term_product,
    kappa_max_lower,
    sigma_n,
    stechkin_bound,
    weak_stechkin_bound,
)
from hdpoly.poly_basis import (
    BasisFamily,
    basis_matrix,
    build_design_matrix,
    eval_expansion,
    kappa,
)
from hdpoly.sampling import draw_grid, draw_near_optimal, near_optimal_distribution
from hdpoly.sr_lasso import candidate_set, cs_approximate
from hdpoly.test_functions import FemSolver1D

LEG = BasisFamily.LEGENDRE
DESK_K = 20_000


def _verdict(num: int, name: str, ok: bool, detail: str) -> bool:
    print(f"\n[criterion {num}] {'PASS' if ok else 'FAIL'} — {name}: {detail}", flush=True)
    return ok


def _line_set(n: int) -> IndexSet:
    from hdpoly.multi_index import MultiIndex

    return IndexSet([MultiIndex.zero()] + [MultiIndex([(1, k)]) for k in range(1, n)])


def _gm_error_on_grid(rows, m_grid: np.ndarray) -> np.ndarray:
    """Per-trial log-log interpolation of error vs m, then the geometric mean."""
    by_trial: dict[int, list] = {}
    for r in rows:
        by_trial.setdefault(r.trial, []).append(r)
    logs = []
    for trial_rows in by_trial.values():
        trial_rows.sort(key=lambda r: r.step)
        ms = np.array([r.m for r in trial_rows], dtype=float)
        es = np.log(np.maximum([r.error_l2 for r in trial_rows], 1e-300))
        logs.append(np.interp(np.log(m_grid), np.log(ms), es))
    return np.exp(np.mean(logs, axis=0))


def test_criterion_1_stability_constant_closed_forms():
    t0 = time.perf_counter()
    exact = all(kappa(LEG, _line_set(n)) == float(n * n) for n in range(1, 51))
    worst = kappa_max_lower(BasisFamily.CHEBYSHEV1, 2, 4)
    elapsed = time.perf_counter() - t0
    ok = exact and worst == 9.0 and elapsed < 5.0
    assert _verdict(
        1, "stability-constant closed forms", ok,
        f"univariate line sets give n^2 exactly for n=1..50: {exact}; "
        f"worst lower set of size 4 (first-kind Chebyshev, d=2) = {worst}; {elapsed:.2f}s",
    )


def test_criterion_2_importance_sampling_keeps_systems_conditioned():
    t0 = time.perf_counter()
    members = list(total_degree_set(3, 4))
    S = IndexSet(
        [nu for nu in members if nu.total_degree <= 2]
        + [nu for nu in members if nu.total_degree == 3][:10]
    )
    n = len(S)
    m = math.ceil(7 * n * math.log(2 * n / 0.1))
    grid = draw_grid(4, DESK_K, LEG, seed=11)
    pi, w = near_optimal_distribution(grid, LEG, S)
    rng = np.random.default_rng(12)
    good = 0
    for _ in range(100):
        s = draw_near_optimal(grid, pi, w, m, rng)
        sv = scipy.linalg.svdvals(build_design_matrix(LEG, S, s.points, s.weights).values)
        good += sv[0] / sv[-1] <= 2.0
    elapsed = time.perf_counter() - t0
    ok = good >= 85 and elapsed < 60.0
    assert _verdict(
        2, "importance-sampled least squares stays well conditioned", ok,
        f"n={n}, m={m}: cond <= 2 in {good}/100 trials (need >= 85); {elapsed:.1f}s",
    )


def test_criterion_3_uniform_sampling_diverges_in_one_dimension():
    t0 = time.perf_counter()
    base = dict(fn="f1", dim=1, method="als", family="legendre", scaling="loglinear",
                trials=20, grid_size=DESK_K, max_m=1000, seed=101)
    mc_rows = run_experiment(ExperimentConfig(sampling="mc", **base)).rows
    opt_rows = run_experiment(ExperimentConfig(sampling="optimal", **base)).rows
    mc_stats = stats_by_step(mc_rows, "cond")
    crossing = next(((m, s.center) for _, m, s in mc_stats if s.center > 1e6), None)
    opt_peak = max(s.center for _, _, s in stats_by_step(opt_rows, "cond"))
    elapsed = time.perf_counter() - t0
    mc_ok = crossing is not None and crossing[0] <= 1000
    opt_ok = opt_peak <= 3.0
    ok = mc_ok and opt_ok and elapsed < 300.0
    assert _verdict(
        3, "uniform sampling ill-conditioning at d=1", ok,
        f"uniform-draw geometric-mean cond crosses 1e6 at m={crossing[0] if crossing else '>1000'}; "
        f"importance-draw peak geometric-mean cond {opt_peak:.2f} (need <= 3); {elapsed:.0f}s",
    )


def test_criterion_4_uniform_matches_importance_in_high_dimension():
    t0 = time.perf_counter()
    base = dict(fn="f2", dim=32, method="als", family="legendre", scaling="loglinear",
                trials=20, grid_size=DESK_K, max_m=1000, seed=102)
    mc = run_experiment(ExperimentConfig(sampling="mc", **base)).rows
    opt = run_experiment(ExperimentConfig(sampling="optimal", **base)).rows
    lo = max(min(r.m for r in rows) for rows in (mc, opt))
    hi = min(max(r.m for r in rows) for rows in (mc, opt))
    m_grid = np.geomspace(lo, hi, 12)
    ratio = _gm_error_on_grid(mc, m_grid) / _gm_error_on_grid(opt, m_grid)
    mc_cond = max(s.center for _, _, s in stats_by_step(mc, "cond"))
    opt_cond = max(s.center for _, _, s in stats_by_step(opt, "cond"))
    elapsed = time.perf_counter() - t0
    ok = (ratio.max() <= 3.0 and mc_cond <= 10.0 and opt_cond <= 10.0 and elapsed < 1200.0)
    assert _verdict(
        4, "uniform vs importance parity at d=32", ok,
        f"worst error ratio {ratio.max():.2f} over m in [{lo},{hi}] (need <= 3); "
        f"peak geometric-mean cond {mc_cond:.2f} / {opt_cond:.2f} (need <= 10); {elapsed:.0f}s",
    )


def test_criterion_5_algebraic_error_decay_rate():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(fn="f3:isq", dim=8, method="als", sampling="optimal",
                           scaling="loglinear", trials=20, grid_size=DESK_K,
                           max_m=2000, seed=103)
    rows = run_experiment(cfg).rows
    pts = [(m, s.center) for _, m, s in stats_by_step(rows, "error_l2") if 100 <= m <= 2000]
    slope = float(np.polyfit(np.log([m for m, _ in pts]), np.log([e for _, e in pts]), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = slope <= -1.2 and elapsed < 900.0
    assert _verdict(
        5, "error decay rate for the product-pole target", ok,
        f"log-log slope {slope:.2f} over m in [100, 2000] across {len(pts)} steps "
        f"(need <= -1.2); {elapsed:.0f}s",
    )


def test_criterion_6_sparse_recovery_from_few_samples():
    t0 = time.perf_counter()
    pool = [nu for nu in candidate_set(4, 10_000) if nu.total_degree <= 6]
    grid = draw_grid(4, DESK_K, LEG, seed=21)
    worst_err, worst_restarts = 0.0, 0
    for inst in range(2):
        rng = np.random.default_rng(100 + inst)
        pick = rng.choice(len(pool), size=5, replace=False)
        support = [pool[i] for i in pick]
        vals = rng.uniform(0.5, 2.0, 5) * rng.choice([-1.0, 1.0], 5)
        S = IndexSet(support)
        lookup = dict(zip(support, vals))
        truth = CoefVector(index_set=S, values=np.array([lookup[nu] for nu in S]))
        target = eval_expansion(LEG, truth, grid.points)
        res = cs_approximate(target, LEG, 4, 250, grid,
                             np.random.default_rng(200 + inst), budget=10_000)
        est = dict(zip(res.coefficients.index_set, res.coefficients.values))
        err = max(abs(est.get(nu, 0.0) - lookup.get(nu, 0.0)) for nu in set(est) | set(lookup))
        worst_err = max(worst_err, err)
        worst_restarts = max(worst_restarts, res.restarts_used)
    elapsed = time.perf_counter() - t0
    ok = worst_err <= 1e-6 and worst_restarts <= 40 and elapsed < 120.0
    assert _verdict(
        6, "5-sparse recovery at m=250, d=4", ok,
        f"max coefficient error {worst_err:.2e} (need <= 1e-6), "
        f"restarts {worst_restarts} (need <= 40) over 2 instances; {elapsed:.0f}s",
    )


def test_criterion_7_sparse_regression_tracks_least_squares():
    t0 = time.perf_counter()
    cs_cfg = ExperimentConfig(fn="f1", dim=16, method="cs", sampling="mc",
                              trials=10, grid_size=DESK_K, max_m=1000, seed=104)
    als_cfg = ExperimentConfig(fn="f1", dim=16, method="als", sampling="optimal",
                               scaling="loglinear", trials=10, grid_size=DESK_K,
                               max_m=1000, seed=104)
    cs_rows = run_experiment(cs_cfg).rows
    als_rows = run_experiment(als_cfg).rows
    cs_steps = stats_by_step(cs_rows, "error_l2")
    final_m, cs_gm = cs_steps[-1][1], cs_steps[-1][2].center
    finals: dict[int, float] = {}
    for r in als_rows:
        finals[r.trial] = r.error_l2  # rows are step-sorted per trial
    als_gm = geometric_stats(list(finals.values())).center
    ratio = cs_gm / als_gm
    elapsed = time.perf_counter() - t0
    ok = final_m == 1000 and ratio <= 5.0 and elapsed < 1800.0
    assert _verdict(
        7, "sparse regression vs adaptive least squares at d=16", ok,
        f"geometric-mean error ratio {ratio:.2f} at m={final_m} (need <= 5; "
        f"sweep capped at m=1000); {elapsed:.0f}s",
    )


def test_criterion_8_oracle_property_suites():
    timings = {}

    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    for _ in range(1000):
        k = int(rng.integers(20, 200))
        alpha = rng.uniform(0.3, 3.0)
        c = rng.uniform(0.2, 1.0, k) * np.arange(1, k + 1) ** -alpha
        p = rng.uniform(0.3, 1.5)
        q = p + rng.uniform(0.01, 1.5)
        n = int(rng.integers(0, k))
        sig, bound = stechkin_bound(c, n, p, q)
        assert sig <= bound + 1e-12
        n = int(rng.integers(1, k))
        wsig, wbound = weak_stechkin_bound(c, n, p, q)
        assert wsig <= wbound + 1e-12
    timings["decay inequalities"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    for _ in range(1000):
        x = rng.normal(size=50) * rng.uniform(0.1, 2.0)
        z = x + rng.normal(size=50) * rng.uniform(0.0, 1.0)
        keep = np.argsort(-np.abs(z), kind="stable")[:5]
        z_s = np.zeros(50)
        z_s[keep] = z[keep]
        assert np.linalg.norm(x - z_s) <= 3.0 * np.linalg.norm(x - z) + 3.0 * sigma_n(x, 5, 2.0) + 1e-12
    timings["extraction lemma"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    a = rng.uniform(0.2, 1.0, 10) * 2.0 ** -np.arange(10)
    b = rng.uniform(0.2, 1.0, 10) * 3.0 ** -np.arange(10)
    sq = np.outer(a, b).ravel() ** 2
    total = sq.sum()
    order = np.sort(sq)[::-1]
    for n in (1, 3, 5, 8, 12):
        _, err = best_n_term_product([a, b], n)
        brute = math.sqrt(max(total - order[:n].sum(), 0.0))
        assert abs(err - brute) <= 1e-12 * max(1.0, brute)
    timings["best n-term product"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    for _ in range(50):
        S = _line_set(1)  # just the origin
        for _ in range(int(rng.integers(1, 15))):
            rm = list(reduced_margin(S, ambient_dim=3))
            S = IndexSet(list(S) + [rm[int(rng.integers(len(rm)))]])
            assert S.is_lower()
        for nu in reduced_margin(S, ambient_dim=3):
            assert all(nu.minus_unit(j) in S for j in nu.support)
    assert hyperbolic_cross_anchored(6, max_dim=3).is_anchored()
    timings["lower-set invariants"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    solver = FemSolver1D()
    fem_val = solver.qoi(solver.solve(np.full(solver.n_elements, math.e)))
    assert abs(fem_val - 1.0 / (8.0 * math.e)) <= 1e-6
    timings["diffusion solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    grid = draw_grid(2, 4000, LEG, seed=31)
    S = total_degree_set(3, 2)
    pi, w = near_optimal_distribution(grid, LEG, S)
    assert abs(pi.sum() - 1.0) <= 1e-12
    Q, _ = np.linalg.qr(basis_matrix(LEG, S, grid.points) / math.sqrt(grid.K))
    M = (Q.T * (pi * w * grid.K)) @ Q
    assert np.max(np.abs(M - np.eye(len(S)))) <= 1e-10
    timings["sampling identities"] = time.perf_counter() - t0

    ok = all(t < 60.0 for t in timings.values())
    detail = ", ".join(f"{name} {t:.1f}s" for name, t in timings.items())
    assert _verdict(8, "oracle and property suites", ok, detail + " (each < 60s)")


def test_criterion_9_byte_identical_reruns_across_workers():
    cfg = dict(fn="f1", dim=2, method="als", sampling="mc", scaling="loglinear",
               trials=4, grid_size=DESK_K, max_m=200, seed=105)
    first = emit(run_experiment(ExperimentConfig(**cfg)))
    second = emit(run_experiment(ExperimentConfig(**cfg)))
    threaded = emit(run_experiment(ExperimentConfig(workers=8, **cfg)))
    ok = first == second == threaded
    assert _verdict(
        9, "deterministic output across reruns and worker counts", ok,
        f"rerun identical: {first == second}; 8-worker identical: {first == threaded}; "
        f"{len(first.splitlines()) - 2} records",
    )
