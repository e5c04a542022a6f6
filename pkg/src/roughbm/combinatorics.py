"""Matchings, leveled diagrams, block decompositions and Gaussian moment sums.

Combinatorial labels are 1-based: a matching pairs up {1, ..., 2n}, a
diagram vertex is (level, slot) with both counted from 1, and blocks
partition {1, ..., l}.
"""
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._contract import BudgetExceeded, contract

MAX_TOTAL_DEGREE = 16


@dataclass(frozen=True)
class Matching:
    pairs: tuple

    def __post_init__(self):
        pairs = tuple(sorted(tuple(sorted(p)) for p in self.pairs))
        flat = sorted(x for p in pairs for x in p)
        if any(len(p) != 2 for p in pairs) or flat != list(range(1, 2 * len(pairs) + 1)):
            raise ValueError(f"not a perfect matching of 1..2n: {self.pairs}")
        object.__setattr__(self, "pairs", pairs)

    @property
    def n(self):
        return len(self.pairs)

    def partner(self, x):
        for a, b in self.pairs:
            if a == x:
                return b
            if b == x:
                return a
        raise KeyError(x)

    def to_json(self):
        return json.dumps([list(p) for p in self.pairs])


def enumerate_matchings(n):
    """All (2n-1)!! perfect matchings of {1..2n}, lexicographic."""
    def rec(items):
        if not items:
            yield ()
            return
        a, rest = items[0], items[1:]
        for i, b in enumerate(rest):
            for tail in rec(rest[:i] + rest[i + 1:]):
                yield ((a, b),) + tail
    for pairs in rec(tuple(range(1, 2 * n + 1))):
        yield Matching(pairs)


def ladder_pairing(n):
    """{{1,2}, {3,4}, ..., {2n-1, 2n}}."""
    if n < 1:
        raise ValueError("need n >= 1")
    return Matching(tuple((2 * j - 1, 2 * j) for j in range(1, n + 1)))


@dataclass(frozen=True)
class Diagram:
    """Complete pairing of the vertices (level, slot) with no intra-level edge."""

    levels: tuple
    edges: tuple

    def __post_init__(self):
        levels = tuple(int(q) for q in self.levels)
        edges = tuple(sorted(tuple(sorted((tuple(a), tuple(b)))) for a, b in self.edges))
        seen = sorted(v for e in edges for v in e)
        expected = [(a, u) for a in range(1, len(levels) + 1) for u in range(1, levels[a - 1] + 1)]
        if seen != expected:
            raise ValueError("every vertex must appear in exactly one edge")
        if any(a[0] == b[0] for a, b in edges):
            raise ValueError("edge inside a level")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "edges", edges)

    @property
    def l(self):
        return len(self.levels)

    def level_edges(self):
        """Edges as (level_a, level_b) pairs with level_a < level_b."""
        return [(a[0], b[0]) for a, b in self.edges]

    def to_json(self):
        return json.dumps({"levels": list(self.levels), "edges": [[list(a), list(b)] for a, b in self.edges]})


def diagram(levels, level_edges):
    """Build a diagram from level pairs, filling slots in order of appearance."""
    used = [0] * len(levels)
    edges = []
    for a, b in level_edges:
        used[a - 1] += 1
        used[b - 1] += 1
        edges.append(((a, used[a - 1]), (b, used[b - 1])))
    return Diagram(tuple(levels), tuple(edges))


def enumerate_diagrams(q):
    """Every complete diagram over level sizes q, lexicographic in vertex order."""
    q = tuple(int(x) for x in q)
    if any(x < 1 for x in q):
        raise ValueError("level sizes must be positive")
    total = sum(q)
    if total > MAX_TOTAL_DEGREE:
        raise ValueError(f"total degree {total} exceeds the enumeration cap {MAX_TOTAL_DEGREE}")
    if total % 2:
        return
    verts = [(a + 1, u + 1) for a in range(len(q)) for u in range(q[a])]
    free = [True] * len(verts)
    left = list(q)

    def rec(edges):
        try:
            i = free.index(True)
        except ValueError:
            yield Diagram(q, tuple(edges))
            return
        rest = sum(left)
        if 2 * max(left) > rest:
            return
        a = verts[i][0]
        free[i] = False
        left[a - 1] -= 1
        for j in range(i + 1, len(verts)):
            if free[j] and verts[j][0] != a:
                b = verts[j][0]
                free[j] = False
                left[b - 1] -= 1
                edges.append((verts[i], verts[j]))
                yield from rec(edges)
                edges.pop()
                free[j] = True
                left[b - 1] += 1
        free[i] = True
        left[a - 1] += 1

    yield from rec([])


def _level_pairings(l):
    for m in enumerate_matchings(l // 2):
        yield m.pairs


def classify_diagram(G):
    """'regular' if the levels can be paired so that no edge leaves its pair."""
    l = G.l
    if l % 2:
        return "irregular"
    if l > 10:
        raise ValueError("classification is limited to 10 levels")
    links = {tuple(sorted(e)) for e in G.level_edges()}
    for pairing in _level_pairings(l):
        if links <= set(pairing):
            return "regular"
    return "irregular"


def _multiplicities(G):
    counts = {}
    for a, b in G.level_edges():
        counts[(a, b)] = counts.get((a, b), 0) + 1
    return counts


def hermite_product_expectation(q, R):
    """E[prod_a H_{q_a}(Z_a)] by summing edge-weight products over all diagrams."""
    R = np.asarray(R, dtype=float)
    terms = []
    for G in enumerate_diagrams(q):
        w = 1.0
        for (a, _), (b, _) in G.edges:
            w *= R[a - 1, b - 1]
        terms.append(w)
    return math.fsum(terms)


def bm_decay_statistic(G, cov, N, absolute=True, components=None, budget=None):
    """N^{-l/2} sum over i in [0,N)^l of prod over edges of rho(i_b - i_a).

    cov is a callable on integer lag arrays, or a StationaryModel together
    with one 0-based component index per level. Absolute values are taken
    edge by edge unless absolute=False.
    """
    l = G.l
    if l > 4:
        raise BudgetExceeded(float(N) ** l, float(N) ** 4, f"T_G over {l} levels")
    lag = np.arange(N)[None, :] - np.arange(N)[:, None]
    if components is not None:
        comp = list(components)

        def kernel(a, b):
            return cov.covariance(comp[a - 1], comp[b - 1], lag)
    else:
        def kernel(a, b):
            return np.asarray(cov(lag), dtype=float)
    factors = []
    for (a, b), mult in sorted(_multiplicities(G).items()):
        k = kernel(a, b)
        if absolute:
            k = np.abs(k)
        factors.append(((a, b), k ** mult))
    sizes = {a: N for a in range(1, l + 1)}
    return contract(sizes, factors, budget, "T_G") / N ** (l / 2)


@dataclass(frozen=True)
class BlockDecomposition:
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0]))
        flat = sorted(x for b in blocks for x in b)
        if any(len(b) == 0 for b in blocks) or flat != list(range(1, len(flat) + 1)):
            raise ValueError(f"not a partition of 1..l: {self.blocks}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def p(self):
        return len(self.blocks)

    @property
    def l(self):
        return sum(len(b) for b in self.blocks)

    def block_of(self):
        """Map element -> 0-based block index."""
        return {x: i for i, b in enumerate(self.blocks) for x in b}

    def is_interval(self):
        """True when every block is a run of consecutive integers."""
        return all(b[-1] - b[0] + 1 == len(b) for b in self.blocks)


def singletons(l):
    return BlockDecomposition(tuple((i,) for i in range(1, l + 1)))


def enumerate_block_decompositions(l, max_block=None):
    """All set partitions of {1..l} with blocks of size <= max_block."""
    if l < 1:
        raise ValueError("need l >= 1")
    max_block = l if max_block is None else max_block
    if max_block < 1:
        raise ValueError("need max_block >= 1")

    def rec(x, blocks):
        if x > l:
            yield BlockDecomposition(tuple(tuple(b) for b in blocks))
            return
        for b in blocks:
            if len(b) < max_block:
                b.append(x)
                yield from rec(x + 1, blocks)
                b.pop()
        blocks.append([x])
        yield from rec(x + 1, blocks)
        blocks.pop()

    yield from rec(1, [])


def compositions(l):
    """Decompositions of 1..l into consecutive runs (2^(l-1) of them)."""
    for mask in range(2 ** (l - 1)):
        blocks, cur = [], [1]
        for x in range(2, l + 1):
            if mask >> (x - 2) & 1:
                cur.append(x)
            else:
                blocks.append(tuple(cur))
                cur = [x]
        blocks.append(tuple(cur))
        yield BlockDecomposition(tuple(blocks))


def block_weight(blocks):
    """prod over blocks of 1/|B|!, as an exact fraction."""
    return Fraction(1, math.prod(math.factorial(len(b)) for b in blocks.blocks))


def external_block_graph(P, blocks):
    """(connected components of the external block graph, internal edge count).

    Vertices are blocks and each matched pair is an edge; loops are internal.
    Components are counted among blocks touched by at least one external edge.
    """
    where = blocks.block_of()
    parent = list(range(blocks.p))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    internal, touched = 0, set()
    for a, b in P.pairs:
        ba, bb = where[a], where[b]
        if ba == bb:
            internal += 1
            continue
        touched.update((ba, bb))
        parent[find(ba)] = find(bb)
    return len({find(x) for x in touched}), internal
