"""Checks of the asymptotic statements at desk scale.

Deterministic sums (pairing sums, block sums, cross-simplex sums) are exact
finite-N values computed by variable elimination over block indices. Monte
Carlo estimators keep one random stream per replication, so results do not
depend on batch size or thread count.
"""
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import roughpath as rp
from ._contract import contract
from .combinatorics import (Matching, block_weight, bm_decay_statistic, classify_diagram,
                            compositions, enumerate_diagrams, hermite_product_expectation)
from .gaussian import farima_taps, farima_variance, sample_paths
from .hermite import HermiteSeries, truncate
from .limits import delta_table

VERDICTS = ("converging", "inconclusive", "violated")


@dataclass
class ConvergenceReport:
    label: str
    grid: list
    values: list
    stderrs: list = None
    target: float = None
    verdict: str = "inconclusive"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = list(self.grid)
        self.values = [float(v) for v in self.values]
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if len(self.values) != len(self.grid):
            raise ValueError("values and grid differ in length")
        if self.stderrs is not None:
            self.stderrs = [float(v) for v in self.stderrs]
            if len(self.stderrs) != len(self.grid):
                raise ValueError("stderrs and grid differ in length")
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    def rows(self):
        se = self.stderrs or [None] * len(self.grid)
        return [(g, v, s, self.target) for g, v, s in zip(self.grid, self.values, se)]

    def to_dict(self):
        return {"label": self.label, "grid": self.grid, "values": self.values, "stderrs": self.stderrs,
                "target": self.target, "verdict": self.verdict, "extra": self.extra}


def decay_verdict(values, ratio=0.25):
    """Three-point monotone decrease plus a final/initial threshold; an exact zero converges."""
    v = list(values)
    if len(v) >= 2 and v[-1] > v[-2]:
        return "violated"
    if abs(v[-1]) <= 1e-15:
        return "converging"
    tail = v[-3:]
    decreasing = all(b < a for a, b in zip(tail, tail[1:]))
    if decreasing and abs(v[-1]) < ratio * abs(v[0]):
        return "converging"
    return "inconclusive"


def loglog_slope(x, y):
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


# Delta sources

def delta_lookup(delta, maxlag):
    """Tabulate a Delta source on lags -maxlag..maxlag.

    delta maps an integer lag array to values of shape (len,) (univariate)
    or (len, m, m). Returns get(k, l, lags) with 0-based components.
    """
    lags = np.arange(-maxlag, maxlag + 1)
    tab = np.asarray(delta(lags), dtype=float)
    if tab.ndim == 1:
        tab = tab[:, None, None]

    def get(k, l, lag):
        return tab[np.asarray(lag) + maxlag, k, l]
    return get


def kronecker_delta(lags):
    """Delta = indicator of lag 0."""
    return (np.asarray(lags) == 0).astype(float)


def model_delta(coeffs, model, M=None):
    """Delta^M from a nonlinearity and a model, as a Delta source."""
    def delta(lags):
        return delta_table(coeffs, model, M, lags)
    return delta


# deterministic sums

def _block_contraction(groups, P, letters, get, budget):
    """Sum over block index tuples for one choice of blocks per window.

    groups: list of (positions, blocks) per window, blocks being tuples of
    global letter indices in window order. Blocks in one window take
    strictly increasing positions. P pairs global letter indices.
    """
    var_of, sizes, pos_of, factors = {}, {}, {}, []
    vid = 0
    for positions, blocks in groups:
        prev = None
        for b in blocks:
            for x in b:
                var_of[x] = vid
            sizes[vid] = len(positions)
            pos_of[vid] = positions
            if prev is not None:
                factors.append(((prev, vid), np.triu(np.ones((len(positions),) * 2), 1)))
            prev = vid
            vid += 1
    const = 1.0
    for a, b in P.pairs:
        va, vb = var_of[a], var_of[b]
        ka, kb = letters[a - 1] - 1, letters[b - 1] - 1
        if va == vb:
            const *= float(get(ka, kb, 0))
            continue
        lag = pos_of[vb][None, :] - pos_of[va][:, None]
        factors.append(((va, vb), get(ka, kb, lag)))
    if const == 0.0:
        return 0.0
    return const * contract(sizes, factors, budget, "pairing sum")


def _check_word(P, word):
    if 2 * P.n != len(word):
        raise ValueError(f"matching over {2 * P.n} letters but the word has {len(word)}")


def block_sum(P, blocks, word, N, delta, s=0.0, t=1.0, budget=None):
    """Lambda_N: the simplex sum restricted to one block pattern, with weight.

    Indices in one block coincide, different blocks are strictly ordered.
    Blocks that are not runs of consecutive letters admit no index in the
    closed simplex, so they give exactly zero.
    """
    word = tuple(word)
    _check_word(P, word)
    if blocks.l != len(word):
        raise ValueError("blocks must partition the letters of the word")
    if not blocks.is_interval():
        return 0.0
    a, b = rp.window(N, s, t)
    positions = np.arange(a, b)
    if positions.size == 0:
        return 0.0
    get = delta_lookup(delta, max(b - a, 1))
    val = _block_contraction([(positions, blocks.blocks)], P, word, get, budget)
    return float(block_weight(blocks)) * val / N ** P.n


def pairing_sum(P, word, N, delta, s=0.0, t=1.0, budget=None):
    """I_N(P, word): N^{-n} times the weighted closed-simplex sum of prod Delta over P."""
    word = tuple(word)
    _check_word(P, word)
    terms = [block_sum(P, B, word, N, delta, s, t, budget) for B in compositions(len(word))]
    return math.fsum(terms)


def cross_simplex_sum(P, windows, words, N, delta, budget=None):
    """Pairing sum over a product of simplices, one per disjoint window.

    words[r] is the word attached to windows[r]; letters are numbered
    globally in window order and P pairs those global indices.
    """
    words = [tuple(w) for w in words]
    letters = tuple(x for w in words for x in w)
    _check_word(P, letters)
    spans = [rp.window(N, s, t) for s, t in windows]
    order = sorted(range(len(spans)), key=lambda r: spans[r])
    for r0, r1 in zip(order, order[1:]):
        if spans[r0][1] > spans[r1][0]:
            raise ValueError("windows overlap")
    maxlag = max(b for _, b in spans) - min(a for a, _ in spans)
    get = delta_lookup(delta, max(maxlag, 1))
    offsets = np.cumsum([0] + [len(w) for w in words])
    per_window = [list(compositions(len(w))) for w in words]
    terms = []
    for combo in itertools.product(*per_window):
        groups, weight = [], 1.0
        for r, B in enumerate(combo):
            blocks = tuple(tuple(x + int(offsets[r]) for x in b) for b in B.blocks)
            groups.append((np.arange(*spans[r]), blocks))
            weight *= float(block_weight(B))
        if any(g[0].size == 0 for g in groups):
            return 0.0
        terms.append(weight * _block_contraction(groups, P, letters, get, budget))
    return math.fsum(terms) / N ** P.n


def simplex_count(N, s, t, lags):
    """Number of chains u_1 <= v_1 < u_2 <= v_2 < ... in the window with v_j - u_j = r_j."""
    if any(r < 0 for r in lags):
        raise ValueError("lags must be nonnegative")
    a, b = rp.window(N, s, t)
    return math.comb(max(b - a - sum(lags), 0), len(lags))


def conditional_decay_partial(r, d, L, J=None):
    """Partial sums of sqrt(d!) a_l^d for l = 1..L and their log-log growth slope.

    a_l^2 is the share of the innovation variance carried by taps j >= l,
    i.e. the conditional variance of X_l given the innovations up to time 0.
    The tail beyond the retained taps is closed with the exact total
    Gamma(1-2r)/Gamma(1-r)^2. The slope is fitted over l in [L/2, L].
    """
    J = 2 * L if J is None else J
    if J <= L:
        raise ValueError("need J > L: the tap range must exceed the summation range")
    if d < 2:
        raise ValueError("need d >= 2")
    c = farima_taps(r, L + 1)
    total = farima_variance(r)
    head = np.concatenate([[0.0], np.cumsum(c * c)])[:L + 1]
    a2 = np.clip(total - head[1:L + 1], 0.0, None) / total
    terms = math.sqrt(math.factorial(d)) * a2 ** (d / 2.0)
    partial = np.cumsum(terms)
    ell = np.arange(1, L + 1)
    upper = ell >= L // 2
    slope = loglog_slope(ell[upper], partial[upper])
    return float(partial[-1]), slope


def bm_irregular_decay(q, cov, N_grid, ratio=0.25, budget=None):
    """T_G across N for every distinct diagram shape over q.

    Returns one ConvergenceReport per shape (diagrams with the same level
    multigraph share T_G). Irregular shapes get a decay verdict; regular ones
    are labelled 'regular' in extra and judged on staying bounded.
    """
    shapes = {}
    for G in enumerate_diagrams(q):
        key = tuple(sorted(G.level_edges()))
        shapes.setdefault(key, [G, 0])[1] += 1
    reports = []
    for key, (G, count) in sorted(shapes.items()):
        kind = classify_diagram(G)
        vals = [bm_decay_statistic(G, cov, N, budget=budget) for N in N_grid]
        verdict = decay_verdict(vals, ratio) if kind == "irregular" else "converging"
        reports.append(ConvergenceReport(f"{kind} {list(key)}", list(N_grid), vals, verdict=verdict,
                                         extra={"kind": kind, "level_edges": [list(e) for e in key],
                                                "multiplicity": count}))
    return reports


# exact finite-N expectation (small instances)

def exact_signature_expectation(word, model, coeffs, N, s=0.0, t=1.0):
    """E<Y_N(s,t), word> for finite-chaos f, by the diagram formula at every index tuple.

    Cost grows like T^k times the diagram count; meant for N <= 24, k <= 4.
    """
    word = tuple(word)
    m = model.m
    fs = [coeffs] * m if isinstance(coeffs, HermiteSeries) else list(coeffs)
    a, b = rp.window(N, s, t)
    k = len(word)
    degree_sets = [[(q, c) for q, c in enumerate(fs[w - 1].coeffs) if c != 0.0] for w in word]
    total = []
    for idx in itertools.combinations_with_replacement(range(a, b), k):
        R = np.eye(k)
        for x in range(k):
            for y in range(x + 1, k):
                R[x, y] = R[y, x] = model.covariance(word[x] - 1, word[y] - 1, idx[y] - idx[x])
        acc = 0.0
        for choice in itertools.product(*degree_sets):
            coef = math.prod(c for _, c in choice)
            qs = tuple(q for q, _ in choice)
            if any(q == 0 for q in qs):
                sub = tuple(i for i, q in enumerate(qs) if q > 0)
                if not sub:
                    acc += coef
                    continue
                acc += coef * hermite_product_expectation(tuple(qs[i] for i in sub), R[np.ix_(sub, sub)])
            else:
                acc += coef * hermite_product_expectation(qs, R)
        total.append(rp.block_runs_weight(idx) * acc)
    return math.fsum(total) / N ** (k / 2.0)


# Monte Carlo

def _truncated(coeffs, m, M):
    fs = [coeffs] * m if isinstance(coeffs, HermiteSeries) else list(coeffs)
    return [truncate(f, M) if M is not None else f for f in fs]


def _replicate(fn, reps, batch, workers):
    starts = list(range(0, reps, batch))
    sizes = [min(batch, reps - s0) for s0 in starts]
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(fn, starts, sizes))
    else:
        parts = [fn(s0, n) for s0, n in zip(starts, sizes)]
    return np.concatenate(parts, axis=0)


def _mean_se(samples):
    samples = np.asarray(samples, float)
    n = samples.shape[0]
    return samples.mean(axis=0), samples.std(axis=0, ddof=1) / math.sqrt(n)


@dataclass
class MomentEstimate:
    mean: float
    stderr: float
    reps: int
    overlapping: bool = False

    def to_dict(self):
        return {"mean": self.mean, "stderr": self.stderr, "reps": self.reps, "overlapping": self.overlapping}


def _overlap(windows, N):
    spans = sorted(rp.window(N, s, t) for s, t in windows)
    return any(b0 > a1 for (a0, b0), (a1, b1) in zip(spans, spans[1:]))


def mc_signature_moment(items, model, coeffs, M, N, reps, seed, batch=500, workers=1):
    """Estimate E[prod_i <Y_N(s_i,t_i), w_i>] with a plain standard error.

    items is a list of (word, (s, t)). Overlapping windows are allowed and
    flagged, since the product formula for the limit needs disjoint windows.
    """
    if reps < 2:
        raise ValueError("need at least 2 replications")
    fs = _truncated(coeffs, model.m, M)

    def run(start, n):
        paths = sample_paths(model, N, seed, n, start)
        val = np.ones(n)
        for word, (s, t) in items:
            val = val * rp.signature_coefficient(paths, fs, word, s, t)
        return val

    vals = _replicate(run, reps, batch, workers)
    mean, se = _mean_se(vals)
    return MomentEstimate(float(mean), float(se), reps, _overlap([w for _, w in items], N))


def mc_expected_signature(model, coeffs, M, N, reps, seed, K=3, s=0.0, t=1.0, batch=500, workers=1):
    """Monte Carlo mean and standard error of every signature level up to K.

    Returns two lists indexed by level, each entry of shape (m,)*k.
    """
    fs = _truncated(coeffs, model.m, M)
    m = model.m

    def run(start, n):
        paths = sample_paths(model, N, seed, n, start)
        sig = rp.signature(paths, fs, s, t, K)
        return np.concatenate([sig.levels[k].reshape(n, -1) for k in range(1, K + 1)], axis=1)

    vals = _replicate(run, reps, batch, workers)
    mean, se = _mean_se(vals)
    means, ses, off = [np.array(1.0)], [np.array(0.0)], 0
    for k in range(1, K + 1):
        size = m ** k
        means.append(mean[off:off + size].reshape((m,) * k))
        ses.append(se[off:off + size].reshape((m,) * k))
        off += size
    return means, ses


def diagonal_lln(model, coeffs, M, windows, N_grid, reps, seed, batch=100, workers=1):
    """Monte Carlo L2 distance between D_N(s,t) and its limit (t-s) Delta^M(0).

    For each N the report holds the root-mean-square Frobenius distance
    summed over windows, with a delta-method standard error. extra records
    per-N entrywise variances, the bias of the mean, and the log-log slope
    of the total variance. The verdict is converging when the distances
    decrease and the final mean bias is within 3 standard errors of zero.
    """
    fs = _truncated(coeffs, model.m, M)
    D0 = delta_table(fs, model, M, [0])[0]
    values, stderrs, variances, biases, bias_ok = [], [], [], [], True
    for N in N_grid:
        def run(start, n, N=N):
            paths = sample_paths(model, N, seed, n, start)
            out = []
            for s, t in windows:
                a, b = rp.window(N, s, t)
                D = rp.diagonal(paths, fs, s, t)
                out.append((D - (b - a) / N * D0).reshape(n, -1))
            return np.concatenate(out, axis=1)

        dev = _replicate(run, reps, batch, workers)
        sq = (dev ** 2).sum(axis=1)
        msq, se_msq = _mean_se(sq)
        rms = math.sqrt(msq)
        values.append(rms)
        stderrs.append(se_msq / (2 * rms) if rms > 0 else 0.0)
        variances.append(float(dev.var(axis=0, ddof=1).sum()))
        mb, sb = _mean_se(dev)
        biases.append(float(np.abs(mb).max()))
        bias_ok = bool(np.all(np.abs(mb) <= 3 * sb + 1e-300))
    tail = values[-3:]
    decreasing = all(b < a for a, b in zip(tail, tail[1:]))
    verdict = "converging" if decreasing and bias_ok else ("violated" if values[-1] > values[0] else "inconclusive")
    slope = loglog_slope(N_grid, variances) if len(N_grid) > 1 else float("nan")
    return ConvergenceReport("diagonal LLN", list(N_grid), values, stderrs, 0.0, verdict,
                             {"variance": variances, "variance_slope": slope, "max_bias": biases,
                              "DeltaZero": D0.tolist()})


def mc_diagonal_variance(model, coeffs, M, N, reps, seed, s=0.0, t=1.0, batch=100):
    """Sample variance of each entry of D_N(s,t) with its standard error."""
    fs = _truncated(coeffs, model.m, M)

    def run(start, n):
        return rp.diagonal(sample_paths(model, N, seed, n, start), fs, s, t).reshape(n, -1)

    x = _replicate(run, reps, batch, 1)
    var = x.var(axis=0, ddof=1)
    c = x - x.mean(axis=0)
    m4 = (c ** 4).mean(axis=0)
    se = np.sqrt(np.clip(m4 - var ** 2, 0.0, None) / reps)
    return var, se


def ladder_report(delta, N_grid, word=(1, 1), s=0.0, t=1.0, target=None, budget=None):
    """pairing_sum at n = 1 across N with its successive differences."""
    P = Matching(((1, 2),))
    vals = [pairing_sum(P, word, N, delta, s, t, budget) for N in N_grid]
    diffs = [abs(b - a) for a, b in zip(vals, vals[1:])]
    shrinking = all(b < a or b <= 1e-14 for a, b in zip(diffs, diffs[1:]))
    close = target is None or abs(vals[-1] - target) <= max(diffs[-1:] or [0.0]) * 10 + 1e-12
    verdict = "converging" if shrinking and close else "inconclusive"
    return ConvergenceReport("ladder pairing sum", list(N_grid), vals, None, target, verdict,
                             {"successive_differences": diffs})


def decay_report(label, fn, N_grid, ratio=0.25):
    """Evaluate a deterministic statistic across N and attach a decay verdict."""
    vals = [fn(N) for N in N_grid]
    return ConvergenceReport(label, list(N_grid), vals, None, 0.0, decay_verdict(vals, ratio))

