"""Acceptance gate: one test per criterion, each at its stated tolerance."""
import math
import time

import numpy as np
import pytest

from doubly_scenery import diagnostics as dg
from doubly_scenery.config import preset
from doubly_scenery.experiments import aggregate_run, run_oracle_test
from doubly_scenery.limit import hurst, limit_cf
from doubly_scenery.stable import DoaLaw, ParameterError, SimParams
from doubly_scenery.stats import hill_tail_index, ks_distance, loglog_slope, neg_log_cf
from doubly_scenery.streams import make_stream
from doubly_scenery.walk import iter_user_batches, resolve_laws

N_MAX = 2 ** 14
MARGINAL = [[0.5, 0.0], [1.0, 0.0], [2.0, 0.0]]
SHAPE = [[1.0, 0.0], [2.0, 0.0], [1.0, -1.0], [0.5, 0.5]]


@pytest.fixture(scope="module")
def desk():
    return preset("paper-desk")


@pytest.fixture(scope="module")
def desk_run(desk):
    vectors = MARGINAL + [v for v in SHAPE if v not in MARGINAL]
    start = time.perf_counter()
    run = aggregate_run(desk, N_MAX, theta_vectors=vectors)
    return run, vectors, time.perf_counter() - start


@pytest.fixture(scope="module")
def walker_stats(desk):
    """B_n and substitution gaps of single walkers over the n grid."""
    params = desk.sim_params
    xi = resolve_laws(params, desk.law_specs())["xi"]
    theta = [1.0, 0.0]
    bn, gaps = {}, {}
    for n in desk.n_grid:
        b_parts, g_parts = [], []
        for batch in iter_user_batches(params, n, desk.times, desk.replicas, desk.root_seed,
                                       desk.law_specs(), experiment="acceptance"):
            b_parts.append(dg.bn_values(batch, theta))
            g_parts.append(dg.substitution_gap(batch, xi, desk.c_n, theta))
        bn[n], gaps[n] = np.concatenate(b_parts), np.concatenate(g_parts)
    return bn, gaps


def _neg_log(run, vectors, v):
    cf = run.cond_cf[:, vectors.index(v)]
    return neg_log_cf(cf.mean(), cf.std(ddof=1) / math.sqrt(cf.size))


def test_criterion_1_exponent_identity(record_criterion):
    g = make_stream(1, "acceptance", "exponents")
    start = time.perf_counter()
    worst = 0.0
    drawn = 0
    while drawn < 1000:
        # uniform on 0 < alpha < gamma <= 2, 1 < beta <= 2 by rejection
        alpha, gamma = g.uniform(0.0, 2.0, size=2)
        gamma = 2.0 - gamma
        beta = 2.0 - g.uniform(0.0, 1.0)
        if not (0 < alpha < gamma and beta > 1):
            continue
        drawn += 1
        kappa = 1.0 + 0.5 * (gamma / alpha - 1.0)
        p = SimParams(alpha, beta, gamma, kappa)
        worst = max(worst, abs(p.r_exponent - hurst(p)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 1.0
    assert record_criterion(1, "exponent identity", ok,
                            f"max |r_exponent - H| = {worst:.2e}, {elapsed:.3f}s")


def test_criterion_2_exact_oracle(tmp_path, record_criterion):
    cfg = preset("oracle-small").replace(out_dir=str(tmp_path))
    start = time.perf_counter()
    report, _ = run_oracle_test(cfg)
    elapsed = time.perf_counter() - start
    frac = report["agree_fraction"]
    ok = frac >= 0.95 and elapsed < 60
    assert record_criterion(2, "exact oracle agreement", ok,
                            f"{frac:.3f} of {len(report['cells'])} cells within 3 se, "
                            f"{elapsed:.1f}s")


def test_criterion_3_marginal_stability(desk, desk_run, record_criterion):
    run, vectors, elapsed = desk_run
    ys, ses = zip(*[_neg_log(run, vectors, v) for v in MARGINAL])
    fit = loglog_slope([0.5, 1.0, 2.0], ys, ses)
    hill = hill_tail_index(run.g[:, 0], 0.05)
    alpha = desk.sim_params.alpha
    ok = (abs(fit.slope - alpha) <= 0.1 and 0.85 <= hill.alpha <= 1.2
          and elapsed <= 600)
    assert record_criterion(
        3, "marginal stability", ok,
        f"slope {fit.slope:.4f} +- {fit.ci95:.4f} (target {alpha}), "
        f"Hill {hill.alpha:.3f} (k={hill.k}), run {elapsed:.0f}s")


def test_criterion_4_cf_shape(desk, desk_run, record_criterion):
    run, vectors, elapsed = desk_run
    start = time.perf_counter()
    laws = resolve_laws(desk.sim_params, desk.law_specs())
    oracle = limit_cf(desk.sim_params, SHAPE, desk.times, desk.replicas, N_MAX, desk.K,
                      desk.root_seed, "limit", laws["step"])
    elapsed += time.perf_counter() - start
    ratios = [_neg_log(run, vectors, v)[0] / oracle.neg_log_cf[i] for i, v in enumerate(SHAPE)]
    dispersion = max(ratios) / min(ratios) - 1.0
    ok = dispersion <= 0.15 and elapsed <= 900
    assert record_criterion(
        4, "CF shape vs limit oracle", ok,
        f"ratios {np.round(ratios, 4).tolist()}, dispersion {dispersion:.4f}")


def test_criterion_5_self_similarity(desk, desk_run, record_criterion):
    run, _, _ = desk_run
    H = hurst(desk.sim_params)
    ks = ks_distance(run.g[:, 1] / 2 ** H, run.g[:, 0], 200,
                     make_stream(desk.root_seed, "acceptance", "ks"))
    assert record_criterion(5, "self-similarity", ks.pvalue >= 0.01,
                            f"KS D = {ks.statistic:.4f}, p = {ks.pvalue:.3f}")


def test_criterion_6_bn_stabilization(walker_stats, record_criterion):
    bn, _ = walker_stats
    a, b = bn[2 ** 12].mean(), bn[2 ** 14].mean()
    rel = abs(a - b) / b
    assert record_criterion(6, "E B_n stabilization", rel <= 0.10,
                            f"E B_n {a:.4f} (2^12) vs {b:.4f} (2^14), rel diff {rel:.4f}")


def test_criterion_7_uniform_integrability(desk, walker_stats, record_criterion):
    bn, _ = walker_stats
    res = dg.check_uniform_integrability(desk.sim_params, bn, kappa=1.1)
    ok = res.verdict != dg.VIOLATED
    assert record_criterion(7, "uniform integrability", ok,
                            f"slope {res.estimate:.4f} +- {res.ci95:.4f}, verdict {res.verdict}")


def test_criterion_8_gap_decay(walker_stats, record_criterion):
    _, gaps = walker_stats
    res = dg.check_gap_decay(gaps)
    ok = res.estimate + res.ci95 < 0
    assert record_criterion(8, "substitution gap decay", ok,
                            f"slope {res.estimate:.4f} +- {res.ci95:.4f}")


def test_criterion_9_condition_checkers(record_criterion):
    p = SimParams(1.5, 2.0, 2.0, 1.1)
    near, tail = dg.check_cf_condition(DoaLaw.gaussian(), p)
    try:
        SimParams(1.9, 2.0, 2.0, 1.1)
        rejected = False
    except ParameterError:
        rejected = True
    ok = near.verdict == tail.verdict == dg.SATISFIED and rejected
    assert record_criterion(
        9, "condition checkers", ok,
        f"near-zero exponent {near.estimate:.4f} {near.verdict}, tail integral "
        f"{tail.estimate:.4f} {tail.verdict}, alpha*kappa >= gamma rejected: {rejected}")
