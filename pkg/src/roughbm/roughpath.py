"""Discrete rough-path lifts of functional sums, word algebra and r-variation.

A sample path is an array of shape (..., m, N) (leading batch axes allowed)
and f is one HermiteSeries per component (or a single series used for all).
The lifted path over a window (s, t) has one linear segment per index
i = floor(N s), ..., floor(N t) - 1 with increment f(X_i) / sqrt(N).

Tensors of level k are stored dense with shape (m,)*k, so flattening in
row-major order lists words in lexicographic order. Words are tuples of
letters in 1..m.
"""
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .hermite import HermiteSeries

MAX_DIM = 8


def grid_index(N, s):
    """floor(N s), robust to the rounding of N s in binary floating point."""
    return int(math.floor(round(N * s, 9)))


def window(N, s, t):
    if not 0.0 <= s <= t <= 1.0:
        raise ValueError(f"window ({s}, {t}) is not inside [0, 1]")
    return grid_index(N, s), grid_index(N, t)


def _series_list(f, m):
    if isinstance(f, HermiteSeries):
        return [f] * m
    f = list(f)
    if len(f) != m:
        raise ValueError(f"need {m} series, got {len(f)}")
    return f


def apply_f(path, f):
    """f_k evaluated on component k: returns an array of shape (..., N, m)."""
    path = np.asarray(path, dtype=float)
    m = path.shape[-2]
    if m > MAX_DIM:
        raise ValueError(f"at most {MAX_DIM} components are supported")
    fs = _series_list(f, m)
    vals = np.stack([fs[k](path[..., k, :]) for k in range(m)], axis=-1)
    return vals


def increments(path, f, s=0.0, t=1.0):
    """Segment increments f(X_i)/sqrt(N) over the window, shape (..., T, m)."""
    N = np.shape(path)[-1]
    a, b = window(N, s, t)
    return apply_f(np.asarray(path)[..., a:b], f) / math.sqrt(N)


def first_order(path, f, s=0.0, t=1.0):
    """S_N(s,t) = N^{-1/2} sum_{i in window} f(X_i)."""
    return increments(path, f, s, t).sum(axis=-2)


def second_order(path, f, s=0.0, t=1.0):
    """S2_N(s,t)[k,l] = N^{-1} sum_{i<j in window} f_k(X_i) f_l(X_j)."""
    x = increments(path, f, s, t)
    before = np.cumsum(x, axis=-2) - x
    return np.einsum("...ik,...il->...kl", before, x)


def diagonal(path, f, s=0.0, t=1.0):
    """D_N(s,t) = N^{-1} sum_{i in window} f(X_i) (x) f(X_i)."""
    x = increments(path, f, s, t)
    return np.einsum("...ik,...il->...kl", x, x)


def _outer(x, y, kx, ky):
    # outer product of trailing tensor axes; leading axes broadcast
    bx = x.shape[:x.ndim - kx]
    by = y.shape[:y.ndim - ky]
    xs = x.reshape(bx + x.shape[len(bx):] + (1,) * ky)
    ys = y.reshape(by + (1,) * kx + y.shape[len(by):])
    return xs * ys


def _time(sel, k):
    # index the time axis that precedes k tensor axes
    return (Ellipsis, sel) + (slice(None),) * k


def signature_path(incs, K):
    """Signatures of every prefix of a piecewise-linear path.

    incs has shape (..., T, m). Returns a list whose entry n has shape
    (..., T+1, (m,)*n): the level-n tensor of the signature over the first
    j segments, j = 0..T. Built from the Chen product of segment exponentials,
    one cumulative sum per level.
    """
    incs = np.asarray(incs, dtype=float)
    T, m = incs.shape[-2], incs.shape[-1]
    batch = incs.shape[:-2]
    E = [None, incs]
    for j in range(2, K + 1):
        E.append(_outer(E[-1], incs, j - 1, 1) / j)
    prefix = [np.ones(batch + (T + 1,))]
    for n in range(1, K + 1):
        z = E[n].copy()
        for k in range(1, n):
            z = z + _outer(prefix[k][_time(slice(0, T), k)], E[n - k], k, n - k)
        P = np.zeros(batch + (T + 1,) + (m,) * n)
        np.cumsum(z, axis=len(batch), out=P[_time(slice(1, None), n)])
        prefix.append(P)
    return prefix


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Truncated tensor series (levels 0..K); level 0 is the scalar 1."""

    levels: tuple

    @property
    def K(self):
        return len(self.levels) - 1

    @property
    def m(self):
        return self.levels[1].shape[-1]

    def coefficient(self, word):
        word = tuple(word)
        if not word:
            return self.levels[0]
        return self.levels[len(word)][(Ellipsis,) + tuple(w - 1 for w in word)]

    def level(self, k):
        return self.levels[k]

    def allclose(self, other, rtol=1e-9, atol=1e-12):
        return all(np.allclose(a, b, rtol=rtol, atol=atol) for a, b in zip(self.levels, other.levels))

    def to_dict(self):
        return {"K": self.K, "m": self.m, "order": "row-major lexicographic words",
                "levels": [np.asarray(x).tolist() for x in self.levels]}


def identity_element(m, K):
    return GroupElement((np.array(1.0),) + tuple(np.zeros((m,) * k) for k in range(1, K + 1)))


def signature(path, f, s=0.0, t=1.0, K=4):
    """Truncated signature of the piecewise-linear lift over (s, t)."""
    sig = signature_path(increments(path, f, s, t), K)
    return GroupElement(tuple(lv[_time(-1, n)] for n, lv in enumerate(sig)))


def signature_coefficient(path, f, word, s=0.0, t=1.0):
    """<Y_N(s,t), word> by the forward recursion over the letters.

    Each segment contributes, for every split of the word into an earlier
    prefix and a block of j letters, the prefix coefficient times the
    product of those letters' increments over j!.
    """
    word = tuple(word)
    x = increments(path, f, s, t)
    if not word:
        return np.ones(x.shape[:-2])
    k = len(word)
    cols = [x[..., w - 1] for w in word]
    T = x.shape[-2]
    prefix = [np.ones(x.shape[:-1])]
    for j in range(1, k + 1):
        z = np.zeros(x.shape[:-1])
        prod = np.ones(x.shape[:-1])
        for a in range(j - 1, -1, -1):
            prod = prod * cols[a]
            z = z + prefix[a] * prod / math.factorial(j - a)
        if j == k:
            return z.sum(axis=-1)
        P = np.zeros(x.shape[:-1])
        if T > 1:
            P[..., 1:] = np.cumsum(z, axis=-1)[..., :-1]
        prefix.append(P)


def block_runs_weight(idx):
    """prod of 1/a! over the runs of equal values in a nondecreasing tuple."""
    w = 1
    for _, grp in itertools.groupby(idx):
        w *= math.factorial(len(list(grp)))
    return 1.0 / w


def signature_coefficient_bruteforce(path, f, word, s=0.0, t=1.0):
    """Weighted iterated sum over i_1 <= ... <= i_k (cost T^k, tests only)."""
    word = tuple(word)
    x = increments(np.asarray(path), f, s, t)
    if x.ndim != 2:
        raise ValueError("brute force takes a single path")
    T = x.shape[0]
    total = 0.0
    for idx in itertools.combinations_with_replacement(range(T), len(word)):
        term = block_runs_weight(idx)
        for i, w in zip(idx, word):
            term *= x[i, w - 1]
        total += term
    return total


@dataclass(frozen=True, eq=False)
class RoughLift:
    level1: np.ndarray
    level2: np.ndarray
    diagonal: np.ndarray
    higher: dict = field(default_factory=dict)
    window: tuple = (0.0, 1.0)
    N: int = 1

    def signature_level2(self):
        return self.level2 + 0.5 * self.diagonal

    def to_dict(self):
        m = self.level1.shape[-1]
        return {"N": self.N, "window": list(self.window), "m": m, "order": "row-major lexicographic words",
                "level1": {"shape": list(self.level1.shape), "data": self.level1.ravel().tolist()},
                "level2": {"shape": list(self.level2.shape), "data": self.level2.ravel().tolist()},
                "diagonal": {"shape": list(self.diagonal.shape), "data": self.diagonal.ravel().tolist()},
                "higher": {str(k): {"shape": list(v.shape), "data": v.ravel().tolist()}
                           for k, v in self.higher.items()}}


def lift(path, f, s=0.0, t=1.0, K=4):
    """S, S2, D and the signature levels 3..K over one window."""
    N = np.shape(path)[-1]
    higher = {}
    if K >= 3:
        sig = signature(path, f, s, t, K)
        higher = {k: sig.levels[k] for k in range(3, K + 1)}
    return RoughLift(first_order(path, f, s, t), second_order(path, f, s, t), diagonal(path, f, s, t),
                     higher, (s, t), N)


def lift_path(path, f, s=0.0, t=1.0):
    """Grid values t_j of S_N(s, t_j) and S2_N(s, t_j), shapes (T+1, m), (T+1, m, m)."""
    x = increments(path, f, s, t)
    T, m = x.shape[-2:]
    X1 = np.zeros(x.shape[:-2] + (T + 1, m))
    X1[..., 1:, :] = np.cumsum(x, axis=-2)
    X2 = np.zeros(x.shape[:-2] + (T + 1, m, m))
    X2[..., 1:, :, :] = np.cumsum(X1[..., :-1, :, None] * x[..., :, None, :], axis=-3)
    return X1, X2


# word algebra

def shuffle(v, w):
    """Shuffle product of two words as a Counter word -> multiplicity."""
    v, w = tuple(v), tuple(w)
    if not v:
        return Counter({w: 1})
    if not w:
        return Counter({v: 1})
    out = Counter()
    for u, c in shuffle(v[:-1], w).items():
        out[u + (v[-1],)] += c
    for u, c in shuffle(v, w[:-1]).items():
        out[u + (w[-1],)] += c
    return out


def words(m, k):
    """All words of length k over 1..m in lexicographic order."""
    return [tuple(w) for w in itertools.product(range(1, m + 1), repeat=k)]


def chen_multiply(a, b):
    """Truncated tensor product z_n = sum_k a_k (x) b_{n-k}."""
    if a.K != b.K:
        raise ValueError(f"truncation mismatch: {a.K} vs {b.K}")
    out = []
    for n in range(a.K + 1):
        z = 0.0
        for k in range(n + 1):
            z = z + _outer(a.levels[k], b.levels[n - k], k, n - k)
        out.append(np.asarray(z))
    return GroupElement(tuple(out))


def _scale(x, c):
    return GroupElement(tuple(c * lv for lv in x.levels))


def _nilpotent_series(y, coeffs):
    # sum_n coeffs[n] y^{(x) n} for y with zero level 0
    K = y.K
    power = identity_element(y.m, K)
    acc = [coeffs[0] * lv for lv in power.levels]
    for n in range(1, K + 1):
        power = chen_multiply(power, y)
        acc = [a + coeffs[n] * lv for a, lv in zip(acc, power.levels)]
    return GroupElement(tuple(np.asarray(a) for a in acc))


def group_inverse(x):
    """Inverse in the truncated tensor algebra, sum_n (1 - x)^n."""
    y = GroupElement((np.zeros_like(x.levels[0]),) + tuple(x.levels[1:]))
    return _nilpotent_series(y, [(-1.0) ** n for n in range(x.K + 1)])


def tensor_exp(y):
    """exp of an element whose level-0 entry is zero."""
    y = GroupElement((np.zeros_like(np.asarray(y.levels[0], float)),) + tuple(y.levels[1:]))
    return _nilpotent_series(y, [1.0 / math.factorial(n) for n in range(y.K + 1)])


def level2_inverse(x1, x2):
    """Inverse of a level-2 element: (-x1, -x2 + x1 (x) x1)."""
    return -x1, -x2 + np.multiply.outer(x1, x1)


# r-variation

def _variation_dp(weights, T):
    best = np.full(T + 1, -np.inf)
    best[0] = 0.0
    for i in range(T):
        cand = best[i] + weights(i)
        np.maximum(best[i + 1:], cand, out=best[i + 1:])
    return best[T]


def p_variation(values, p):
    """(sup over grid partitions of sum |X(t_{j+1}) - X(t_j)|^p)^{1/p}.

    values has shape (T+1,) or (T+1, d); norms are Euclidean.
    """
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    T = X.shape[0] - 1
    if T <= 0:
        return 0.0

    def w(i):
        return np.linalg.norm(X[i + 1:] - X[i], axis=1) ** p

    return float(_variation_dp(w, T) ** (1.0 / p))


def level2_increments(X1, X2, i):
    """X2(t_i, t_j) = X2(t_j) - X2(t_i) - X1(t_i) (x) (X1(t_j) - X1(t_i)), j > i."""
    return X2[i + 1:] - X2[i] - X1[i][None, :, None] * (X1[i + 1:] - X1[i])[:, None, :]


def r_variation(X1, X2, r):
    """Level-1 r-variation and level-2 (r/2)-variation of a grid rough path.

    X1 has shape (T+1, m) and X2 shape (T+1, m, m), both starting anywhere;
    only increments matter. Level 2 uses the Frobenius norm.
    """
    if r <= 2:
        raise ValueError("r-variation needs r > 2")
    X1 = np.asarray(X1, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    T = X1.shape[0] - 1
    if T <= 0:
        return 0.0, 0.0
    v1 = p_variation(X1, r)
    q = r / 2.0

    def w2(i):
        d = level2_increments(X1, X2, i)
        return np.sqrt((d * d).sum(axis=(1, 2))) ** q

    v2 = float(_variation_dp(w2, T) ** (1.0 / q))
    return v1, v2
