import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roughbm._contract import BudgetExceeded
from roughbm.combinatorics import (
    BlockDecomposition, Diagram, Matching, bm_decay_statistic, block_weight, classify_diagram, compositions,
    diagram, enumerate_block_decompositions, enumerate_diagrams, enumerate_matchings, external_block_graph,
    hermite_product_expectation, ladder_pairing, singletons,
)
from roughbm.hermite import hermite_eval

IRREGULAR = Diagram((2, 1, 2, 1), (((1, 1), (2, 1)), ((1, 2), (3, 1)), ((3, 2), (4, 1))))


def random_correlation(rng, l):
    A = rng.standard_normal((l, l + 2))
    C = A @ A.T
    d = np.sqrt(np.diag(C))
    return C / np.outer(d, d)


def test_matching_counts():
    assert [len(list(enumerate_matchings(n))) for n in (1, 2, 3, 4)] == [1, 3, 15, 105]
    ms = list(enumerate_matchings(3))
    assert len(set(ms)) == 15
    assert ms == sorted(ms, key=lambda m: m.pairs)


def test_ladder():
    assert ladder_pairing(1).pairs == ((1, 2),)
    assert ladder_pairing(2).pairs == ((1, 2), (3, 4))
    assert ladder_pairing(3).pairs == ((1, 2), (3, 4), (5, 6))
    with pytest.raises(ValueError):
        Matching(((1, 2), (2, 3)))


def test_diagram_counts():
    assert len(list(enumerate_diagrams((1, 1)))) == 1
    assert len(list(enumerate_diagrams((2, 2)))) == 2
    assert len(list(enumerate_diagrams((1, 1, 1)))) == 0
    for q in range(1, 6):
        assert len(list(enumerate_diagrams((q, q)))) == math.factorial(q)
    with pytest.raises(ValueError):
        list(enumerate_diagrams((9, 9)))


def _brute_count(q):
    # independent oracle: perfect matchings of all vertices, filtered for intra-level edges
    verts = [(a, u) for a, n in enumerate(q) for u in range(n)]
    if len(verts) % 2:
        return 0
    count = 0
    for m in enumerate_matchings(len(verts) // 2):
        if all(verts[i - 1][0] != verts[j - 1][0] for i, j in m.pairs):
            count += 1
    return count


@pytest.mark.parametrize("q", [(1, 1, 2), (2, 1, 2, 1), (1, 1, 1, 1), (3, 1, 2), (2, 2, 2), (1, 2, 3, 2)])
def test_diagram_counts_match_brute_force(q):
    Gs = list(enumerate_diagrams(q))
    assert len(Gs) == _brute_count(q)
    for G in Gs:
        seen = [v for e in G.edges for v in e]
        assert len(seen) == len(set(seen)) == sum(q)
        assert all(a[0] != b[0] for a, b in G.edges)


def test_classification():
    for G in enumerate_diagrams((3, 3)):
        assert classify_diagram(G) == "regular"
    for G in enumerate_diagrams((1, 2, 1)):
        assert classify_diagram(G) == "irregular"
    assert classify_diagram(IRREGULAR) == "irregular"
    assert classify_diagram(diagram((1, 1, 1, 1), [(1, 3), (2, 4)])) == "regular"


@given(st.randoms(use_true_random=False))
def test_classification_invariant_under_slot_relabeling(rnd):
    Gs = list(enumerate_diagrams((2, 1, 2, 1))) + list(enumerate_diagrams((2, 2, 1, 1)))
    G = rnd.choice(Gs)
    perms = {a: rnd.sample(range(1, q + 1), q) for a, q in enumerate(G.levels, start=1)}
    relabel = lambda v: (v[0], perms[v[0]][v[1] - 1])
    H = Diagram(G.levels, tuple((relabel(a), relabel(b)) for a, b in G.edges))
    assert classify_diagram(H) == classify_diagram(G)


def test_product_expectation_examples():
    rho = 0.37
    R2 = np.array([[1, rho], [rho, 1]])
    assert hermite_product_expectation((1, 1), R2) == pytest.approx(rho)
    assert hermite_product_expectation((2, 2), R2) == pytest.approx(2 * rho ** 2)
    R3 = np.full((3, 3), rho) + (1 - rho) * np.eye(3)
    assert hermite_product_expectation((1, 1, 2), R3) == pytest.approx(2 * rho ** 2)


@given(st.integers(1, 5), st.integers(1, 5), st.floats(-0.99, 0.99))
def test_two_level_orthogonality(q1, q2, rho):
    R = np.array([[1, rho], [rho, 1]])
    expected = math.factorial(q1) * rho ** q1 if q1 == q2 else 0.0
    assert hermite_product_expectation((q1, q2), R) == pytest.approx(expected, abs=1e-14)


def test_product_expectation_monte_carlo():
    rng = np.random.default_rng(7)
    for q in [(1, 1, 2), (2, 1, 2, 1), (2, 2, 2), (3, 1, 1, 1)]:
        R = random_correlation(rng, len(q))
        Z = rng.standard_normal((200_000, len(q))) @ np.linalg.cholesky(R).T
        prod = np.prod([hermite_eval(qa, Z[:, a]) for a, qa in enumerate(q)], axis=0)
        se = prod.std(ddof=1) / math.sqrt(prod.size)
        assert abs(prod.mean() - hermite_product_expectation(q, R)) <= 4 * se


def test_decay_statistic_two_levels():
    delta = lambda u: (np.asarray(u) == 0).astype(float)
    for q in (1, 2, 3):
        G = next(iter(enumerate_diagrams((q, q))))
        for N in (5, 17, 64):
            assert bm_decay_statistic(G, delta, N) == pytest.approx(1.0, abs=1e-13)
    geo = lambda u: 0.5 ** np.abs(np.asarray(u, float))
    G = next(iter(enumerate_diagrams((2, 2))))
    vals = [bm_decay_statistic(G, geo, N) for N in (16, 64, 256, 1024)]
    limit = 1 + 2 * sum(0.25 ** k for k in range(1, 200))
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(abs(b - limit) < abs(a - limit) for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(limit, rel=2e-3)


def test_decay_statistic_matches_brute_force_and_decreases():
    geo = lambda u: 0.6 ** np.abs(np.asarray(u, float))
    N = 9
    brute = 0.0
    for idx in itertools.product(range(N), repeat=4):
        w = 1.0
        for a, b in IRREGULAR.level_edges():
            w *= abs(0.6 ** abs(idx[a - 1] - idx[b - 1]))
        brute += w
    assert bm_decay_statistic(IRREGULAR, geo, N) == pytest.approx(brute / N ** 2, rel=1e-12)
    vals = [bm_decay_statistic(IRREGULAR, geo, N) for N in (64, 128, 256, 512)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    five = diagram((1,) * 6, [(1, 2), (3, 4), (5, 6)])
    with pytest.raises(BudgetExceeded):
        bm_decay_statistic(five, geo, 8)


def test_block_decompositions():
    assert len(list(enumerate_block_decompositions(2, 2))) == 2
    assert len(list(enumerate_block_decompositions(3, 3))) == 5
    assert len(list(enumerate_block_decompositions(4, 2))) == 10
    assert len(list(enumerate_block_decompositions(5))) == 52
    assert len(list(compositions(5))) == 16
    assert all(B.is_interval() for B in compositions(5))


def test_block_weights():
    assert block_weight(singletons(4)) == 1
    assert block_weight(BlockDecomposition(((1, 2), (3,), (4,)))) == Fraction(1, 2)
    assert block_weight(BlockDecomposition(((1, 2, 3),))) == Fraction(1, 6)


def test_external_block_graph():
    assert external_block_graph(ladder_pairing(3), singletons(6)) == (3, 0)
    P = ladder_pairing(3)
    assert external_block_graph(P, BlockDecomposition(P.pairs)) == (0, 3)
    P = Matching(((1, 9), (2, 7), (3, 4), (5, 10), (6, 8)))
    B = BlockDecomposition(((1, 6, 8), (2, 5), (3, 4, 9), (7, 10)))
    assert external_block_graph(P, B) == (2, 2)
