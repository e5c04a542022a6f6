"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Tolerances, grids and replication counts are the stated ones. Criteria whose
stated outcome is not reachable are still checked as stated and fail.
"""
import itertools
import math
import time
import warnings

import numpy as np
from acceptance_log import record

from roughbm import roughpath as rp
from roughbm.combinatorics import Diagram, Matching, BlockDecomposition, bm_decay_statistic, ladder_pairing
from roughbm.combinatorics import hermite_product_expectation
from roughbm.gaussian import ell_d_partial_norm, farima_correlation, farima_model, iid_model, make_model
from roughbm.hermite import hermite_series, hermite_table, monomial, preset
from roughbm.homogenize import VectorFieldSpec, compare_invariance
from roughbm.limits import characteristics, cutoff_convergence_table
from roughbm.verify import (
    block_sum, conditional_decay_partial, cross_simplex_sum, kronecker_delta, loglog_slope, mc_diagonal_variance,
    mc_expected_signature, model_delta, pairing_sum, simplex_count,
)

LAGGED = make_model([[1, 0], [0.6, 0.8]])
IRREGULAR = Diagram((2, 1, 2, 1), (((1, 1), (2, 1)), ((1, 2), (3, 1)), ((3, 2), (4, 1))))
DECAY_GRID = [64, 128, 256, 512]


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


def random_f(rng, Q=3):
    return hermite_series(*rng.uniform(-1, 1, Q + 1))


def test_1_algebraic_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for N in (1, 2, 7, 64):
        for m in (1, 2, 3):
            f = [random_f(rng) for _ in range(m)]
            paths = rng.standard_normal((100, m, N))
            S, S2, D = rp.first_order(paths, f), rp.second_order(paths, f), rp.diagonal(paths, f)
            sig2 = rp.signature(paths, f, K=2).levels[2]
            for r in range(100):
                sym = 0.5 * (S2[r] + S2[r].T)
                worst = max(worst, rel_err(sym, 0.5 * np.outer(S[r], S[r]) - 0.5 * D[r]),
                            rel_err(sig2[r], S2[r] + 0.5 * D[r]))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 1.0
    record(1, ok, f"symmetric-part and level-2 identities, max rel err {worst:.2e} (tol 1e-10), {elapsed:.2f}s (< 1s)")
    assert ok


def test_2_chen_and_shuffle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_chen = worst_shuffle = 0.0
    m, N = 2, 32
    for _ in range(50):
        f = [random_f(rng) for _ in range(m)]
        x = rng.standard_normal((m, N))
        u = rng.integers(1, N) / N
        ab = rp.chen_multiply(rp.signature(x, f, 0, u, K=4), rp.signature(x, f, u, 1, K=4))
        full = rp.signature(x, f, 0, 1, K=4)
        worst_chen = max(worst_chen, max(rel_err(a, b) for a, b in zip(ab.levels, full.levels)))
        for kv in range(1, 4):
            for kw in range(1, 5 - kv):
                for v in rp.words(m, kv):
                    for w in rp.words(m, kw):
                        lhs = full.coefficient(v) * full.coefficient(w)
                        rhs = math.fsum(c * full.coefficient(z) for z, c in rp.shuffle(v, w).items())
                        worst_shuffle = max(worst_shuffle, abs(lhs - rhs) / max(1.0, abs(lhs)))
    elapsed = time.perf_counter() - t0
    ok = worst_chen <= 1e-9 and worst_shuffle <= 1e-9 and elapsed < 10
    record(2, ok, f"Chen rel err {worst_chen:.2e}, shuffle rel err {worst_shuffle:.2e} (tol 1e-9), "
                  f"{elapsed:.1f}s (< 10s)")
    assert ok


def _partitions(n, largest=None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _partitions(n - k, k):
            yield (k,) + rest


def test_3_diagram_formula_monte_carlo():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    vectors = [p for n in range(1, 9) for p in _partitions(n)]
    samples, chunk, worst, fails = 10 ** 6, 10 ** 5, 0.0, 0
    for _ in range(20):
        A = rng.standard_normal((8, 10))
        C = A @ A.T
        d = np.sqrt(np.diag(C))
        R = C / np.outer(d, d)
        L = np.linalg.cholesky(R)
        s1 = np.zeros(len(vectors))
        s2 = np.zeros(len(vectors))
        for _ in range(samples // chunk):
            Z = rng.standard_normal((chunk, 8)) @ L.T
            H = hermite_table(8, Z)  # (9, chunk, 8)
            for i, q in enumerate(vectors):
                prod = H[q[0], :, 0].copy()
                for a in range(1, len(q)):
                    prod *= H[q[a], :, a]
                s1[i] += prod.sum()
                s2[i] += prod @ prod
        mean = s1 / samples
        se = np.sqrt(np.maximum(s2 / samples - mean ** 2, 0) / (samples - 1))
        for i, q in enumerate(vectors):
            exact = hermite_product_expectation(q, R[:len(q), :len(q)])
            z = abs(mean[i] - exact) / se[i] if se[i] > 0 else (0.0 if abs(mean[i] - exact) < 1e-12 else np.inf)
            worst = max(worst, z)
            fails += z > 4
    elapsed = time.perf_counter() - t0
    ok = fails == 0 and elapsed < 60
    record(3, ok, f"{len(vectors)} degree vectors x 20 correlations, max |z| {worst:.2f} (limit 4), "
                  f"{fails} outside, {elapsed:.1f}s (< 60s)")
    assert ok


def test_4_fawcett_moments():
    t0 = time.perf_counter()
    f = hermite_series(0, 1, 0.5)
    ch = characteristics(f, LAGGED, M=2, U=16)
    means, ses = mc_expected_signature(LAGGED, f, 2, 512, 20_000, seed=4, K=3, workers=4)
    target2 = 0.5 * (ch.Sigma + 2 * ch.Area)
    z = {k: np.abs(means[k] - (target2 if k == 2 else 0.0)) / ses[k] for k in (1, 2, 3)}
    elapsed = time.perf_counter() - t0
    ok = all(np.all(z[k] <= 4) for k in (1, 2, 3)) and elapsed < 300
    record(4, ok, f"max |z| level1 {z[1].max():.2f}, level2 {z[2].max():.2f}, level3 {z[3].max():.2f} "
                  f"(limit 4), {elapsed:.0f}s (< 300s)")
    assert ok


def test_5_ladder_exactness():
    t0 = time.perf_counter()
    P = ladder_pairing(1)
    exact_err = max(abs(pairing_sum(P, (1, 1), N, kronecker_delta) - 0.5) for N in (10, 100, 1000))
    # summable Delta(u) = 2^-|u|, so 1/2 Delta(0) + Gamma = 1/2 + 1
    delta = lambda lags: 0.5 ** np.abs(np.asarray(lags, float))
    target = 1.5
    grid = [16, 32, 64, 128, 256, 512, 1024]
    vals = [pairing_sum(P, (1, 1), N, delta) for N in grid]
    diffs = [abs(b - a) for a, b in zip(vals, vals[1:])]
    devs = [abs(v - target) for v in vals]
    decreasing = all(b < a for a, b in zip(diffs, diffs[1:]))
    approaching = all(b < a for a, b in zip(devs, devs[1:]))
    elapsed = time.perf_counter() - t0
    ok = exact_err <= 1e-12 and decreasing and approaching and elapsed < 1.0
    record(5, ok, f"delta_0 max err {exact_err:.1e} (tol 1e-12); summable: successive diffs decreasing={decreasing}, "
                  f"distance to limit {devs[0]:.3g} -> {devs[-1]:.3g}, {elapsed:.2f}s (< 1s)")
    assert ok


def test_6_decay_suite():
    t0 = time.perf_counter()
    r = 0.15
    model = farima_model(r, 2 ** 16)
    cov = lambda lags: model.covariance(0, 0, lags)
    delta = model_delta(monomial(2), model)
    word = (1, 1, 1, 1)
    crossing = Matching(((1, 3), (2, 4)))
    block3 = BlockDecomposition(((1, 2, 3), (4,)))
    series = {
        "(a) T_G irregular q=(2,1,2,1)": lambda N: bm_decay_statistic(IRREGULAR, cov, N),
        "(b) crossing pairing n=2": lambda N: pairing_sum(crossing, word, N, delta),
        "(c) size-3 block": lambda N: abs(block_sum(ladder_pairing(2), block3, word, N, delta)),
        "(d) cross-simplex": lambda N: abs(cross_simplex_sum(crossing, [(0, 0.5), (0.5, 1)], [(1, 1), (1, 1)],
                                                             N, delta)),
    }
    parts, all_ok = [], True
    for name, fn in series.items():
        vals = [fn(N) for N in DECAY_GRID]
        strict = all(b < a for a, b in zip(vals, vals[1:]))
        ratio = vals[-1] / vals[0]
        ok = strict and ratio < 0.25
        all_ok &= ok
        parts.append(f"{name}: {'ok' if ok else 'red'} ratio {ratio:.3f}")
    elapsed = time.perf_counter() - t0
    all_ok &= elapsed < 300
    record(6, all_ok, "; ".join(parts) + f" (need strict decrease, ratio < 0.25), {elapsed:.0f}s")
    assert all_ok


def test_7_diagonal_lln():
    t0 = time.perf_counter()
    model = farima_model(0.2, 2 ** 16)
    grid = [2 ** k for k in range(6, 13)]
    variances = [mc_diagonal_variance(model, monomial(2), 2, N, 500, seed=7)[0][0] for N in grid]
    slope = loglog_slope(grid, variances)
    N = 256
    var, se = mc_diagonal_variance(iid_model(1), monomial(1), 1, N, 10_000, seed=8)
    z = abs(var[0] - 2 / N) / se[0]
    elapsed = time.perf_counter() - t0
    ok = slope <= -0.8 and z <= 4 and elapsed < 120
    record(7, ok, f"FARIMA(0.2) H_2 variance slope {slope:.3f} (<= -0.8); i.i.d. H_1 Var vs 2/N |z| {z:.2f} "
                  f"(<= 4), {elapsed:.0f}s (< 120s)")
    assert ok


def test_8_counterexample():
    t0 = time.perf_counter()
    _, slope = conditional_decay_partial(0.2, 2, 1_000_000)
    _, shell = ell_d_partial_norm(lambda u: farima_correlation(0.2, u), 2, 2 ** 16)
    cauchy = shell < 1e-4
    _, slope_small = conditional_decay_partial(0.05, 2, 1_000_000)
    elapsed = time.perf_counter() - t0
    first = abs(slope - 0.4) <= 0.1 and cauchy
    second = abs(slope_small - 0.9) <= 0.1
    ok = first and second and elapsed < 30
    record(8, ok, f"r=0.2 slope {slope:.3f} (0.4 +- 0.1), rho l2 outer shell {shell:.1e} (< 1e-4); "
                  f"r=0.05 slope {slope_small:.3f} (stated 0.9 +- 0.1), {elapsed:.1f}s (< 30s)")
    assert ok


def _brute_simplex(N, s, t, lags):
    a, b = rp.window(N, s, t)
    n = len(lags)
    count = 0
    for us in itertools.combinations_with_replacement(range(a, b), n):
        vs = [u + r for u, r in zip(us, lags)]
        if vs[-1] < b and all(vs[j] < us[j + 1] for j in range(n - 1)):
            count += 1
    return count


def test_9_simplex_count():
    mismatches, checked = 0, 0
    for s, t in [(0.0, 1.0), (0.25, 0.8)]:
        for N in range(1, 21):
            for n in (1, 2, 3):
                for lags in itertools.product(range(6), repeat=n):
                    checked += 1
                    mismatches += simplex_count(N, s, t, lags) != _brute_simplex(N, s, t, lags)
    worst = 0.0
    for s, t in [(0.0, 1.0), (0.2, 0.7)]:
        for lags in [(0,), (3,), (0, 0), (1, 4), (0, 0, 0), (2, 5, 1)]:
            n = len(lags)
            ratio = simplex_count(10 ** 4, s, t, lags) / 10 ** (4 * n)
            worst = max(worst, abs(ratio / ((t - s) ** n / math.factorial(n)) - 1))
    ok = mismatches == 0 and worst < 0.02
    record(9, ok, f"binomial vs brute force: {mismatches} mismatches in {checked} cases; "
                  f"max relative gap at N=1e4 {worst:.4f} (< 0.02)")
    assert ok


def test_10_homogenization_contrast():
    t0 = time.perf_counter()
    B = np.zeros((2, 2, 2))
    B[0, 1, 0] = 0.5
    B[1, 0, 1] = -0.3
    vf = VectorFieldSpec("bilinear", np.eye(2), B)
    rep = compare_invariance(vf, LAGGED, monomial(1), 1, [2 ** 12], 20_000, seed=10, steps=4096, U=16)
    zc, zu = rep.extra["z_corrected"][-1], rep.extra["z_uncorrected"][-1]
    elapsed = time.perf_counter() - t0
    ok = zc <= 4 and zu > 5 and elapsed < 600
    record(10, ok, f"N=4096, reps=2e4: with correction |z| {zc:.2f} (<= 4), without {zu:.2f} (> 5), "
                   f"{elapsed:.0f}s (< 600s)")
    assert ok


def test_11_cutoff_removal():
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        f = preset("centred_abs", Q=16)
    parts, all_ok = [], True
    for name, model, U in [("lagged pair", LAGGED, 16), ("FARIMA(0.2)", farima_model(0.2, 2 ** 14), 2 ** 14)]:
        rows = cutoff_convergence_table(f, model, [2, 4, 6, 8, 12], U=U)
        devs = [r["delta0_dev"] for r in rows]
        monotone = all(b < a for a, b in zip(devs, devs[1:]))
        bounded = all(r["delta0_dev"] <= r["bound"] for r in rows)
        all_ok &= monotone and bounded
        parts.append(f"{name}: dev {devs[0]:.2e} -> {devs[-1]:.2e}, monotone={monotone}, within bound={bounded}")
    elapsed = time.perf_counter() - t0
    all_ok &= elapsed < 30
    record(11, all_ok, "; ".join(parts) + f", {elapsed:.1f}s (< 30s)")
    assert all_ok
