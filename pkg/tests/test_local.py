import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perfect_gibbs.diagnostics import chi_square_gof
from perfect_gibbs.errors import EnumerationCapExceeded, ZeroConditionalPartition
from perfect_gibbs.graph import Graph, boundary
from perfect_gibbs.instances import coloring_instance, grid_graph, hardcore_instance, ising_instance
from perfect_gibbs.local import (DiscreteDistribution, FilterContext, block_of, brute_force_distribution,
                                 brute_force_marginal, canonical_assignments, conditional_block_distribution,
                                 exact_bernoulli, exact_index, marginal, mu_low, mu_min, restricted_system,
                                 sample_block, spin_classes, uniform_below)
from perfect_gibbs.spin import SpinSystem, is_feasible, is_permissive

import oracle
from conftest import COLOR3, cycle, path, random_instance, triangle_coloring


def independent_system(n, q):
    return SpinSystem(Graph(n, [(i, i + 1) for i in range(n - 1)]), q, np.ones((n, q)), np.ones((q, q)))


# --- restricted systems and marginals ---------------------------------------


def test_restricted_system_examples():
    s = hardcore_instance(path(4), 1.0)
    sub, index = restricted_system(s, [1])
    assert index == (0, 1, 2)
    assert sub.graph.edges == ((0, 1), (1, 2))
    full, index = restricted_system(s, range(4))
    assert index == (0, 1, 2, 3) and full.graph.edges == s.graph.edges
    star, index = restricted_system(coloring_instance(grid_graph(3, 3), 5), [4])
    assert index == (1, 3, 4, 5, 7)
    assert star.graph.degree(2) == 4 and len(star.graph.edges) == 4


def test_marginal_examples():
    single = SpinSystem(Graph(1, []), 2, [[1, 1]], np.ones((2, 2)))
    assert marginal(single, 0, {}).probs == pytest.approx((0.5, 0.5))
    tri = triangle_coloring(rational=True)
    assert marginal(tri, 1, {0: 0}).probs == (0, Fraction(1, 2), Fraction(1, 2))
    hc = hardcore_instance(path(3), "1")
    assert marginal(hc, 1, {}).probs == (Fraction(4, 5), Fraction(1, 5))


def test_marginal_rejects_pinned_vertex_and_zero_partition():
    tri = triangle_coloring()
    with pytest.raises(ValueError):
        marginal(tri, 0, {0: 1})
    k3_q2 = SpinSystem(cycle(3), 2, np.ones((3, 2)), [[0, 1], [1, 0]])
    with pytest.raises(ZeroConditionalPartition):
        marginal(k3_q2, 0, {})


def test_marginal_cap():
    s = coloring_instance(path(12), 3)
    with pytest.raises(EnumerationCapExceeded):
        marginal(s, 0, {}, cap=1000)
    # pinning vertex 3 cuts the free region down to 3 vertices
    assert marginal(s, 0, {3: 0}, cap=1000).probs[0] > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_marginal_matches_oracle(seed, rational):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    q = int(rng.integers(2, 5))
    s = random_instance(rng, n, q, p=0.4, hard=bool(seed % 3 == 0) and q > 2)
    if rational:
        s = s.converted("rational")
    v = int(rng.integers(n))
    others = [w for w in range(n) if w != v]
    pinned = {w: int(rng.integers(q)) for w in others if rng.random() < 0.4}
    try:
        expected = oracle.conditional_marginal(s, v, pinned)
    except ZeroDivisionError:
        with pytest.raises(ZeroConditionalPartition):
            marginal(s, v, pinned)
        return
    got = marginal(s, v, pinned).probs
    if rational:
        assert list(got) == expected
    else:
        assert np.max(np.abs(np.array(got) - np.array(expected))) <= 1e-10
    assert brute_force_marginal(s, v, pinned).probs == pytest.approx(got, abs=1e-12)


# --- block sampling ---------------------------------------------------------


def test_conditional_block_distribution_triangle():
    tri = triangle_coloring(rational=True)
    d = conditional_block_distribution(tri, [1, 2], {0: 0})
    assert d.as_dict() == {(1, 2): Fraction(1, 2), (2, 1): Fraction(1, 2)}


def test_sample_block_isolated_vertex_is_uniform():
    s = SpinSystem(Graph(3, [(0, 1)]), 2, np.ones((3, 2)), [[1, 0], [0, 1]])
    rng = np.random.default_rng(5)
    counts = Counter(sample_block(s, [2], {}, rng)[2] for _ in range(20000))
    res = chi_square_gof(counts, DiscreteDistribution((0, 1), (0.5, 0.5)))
    assert res.passes()


def test_sample_block_triangle_chi_square():
    tri = triangle_coloring()
    rng = np.random.default_rng(2024)
    counts = Counter()
    for _ in range(100_000):
        tau = sample_block(tri, [1, 2], {0: 0}, rng)
        counts[(tau[1], tau[2])] += 1
    assert set(counts) == {(1, 2), (2, 1)}
    res = chi_square_gof(counts, conditional_block_distribution(tri, [1, 2], {0: 0}))
    assert res.passes()


def test_sample_block_rational_matches_distribution():
    s = hardcore_instance(path(4), "3/2")
    rng = np.random.default_rng(8)
    expected = conditional_block_distribution(s, [1, 2], {0: 0, 3: 1})
    counts = Counter()
    for _ in range(20000):
        tau = sample_block(s, [1, 2], {0: 0, 3: 1}, rng)
        counts[(tau[1], tau[2])] += 1
    assert chi_square_gof(counts, expected).passes()


def test_sample_block_large_block_uses_chain_rule():
    # 7 x 7 open grid minus nothing: q^|B| is far above the enumeration threshold
    g = grid_graph(3, 3)
    s = coloring_instance(g, 5)
    rng = np.random.default_rng(1)
    seen = Counter()
    for _ in range(3000):
        tau = sample_block(s, range(9), {}, rng)
        X = [tau[v] for v in range(9)]
        assert is_feasible(s, X)
        seen[X[4]] += 1
    # the centre is uniform over 5 colors by symmetry
    res = chi_square_gof(seen, DiscreteDistribution(tuple(range(5)), (0.2,) * 5))
    assert res.passes()


# --- the filter numerator ---------------------------------------------------


def oracle_mu_min(s, R, u, X, ell):
    block = block_of(s, R, u, ell)
    dB = boundary(s.graph, block)
    fixed = {w: X[w] for w in dB if w in R}
    free = [w for w in dB if w not in R]
    best = None
    for spins in itertools.product(range(s.q), repeat=len(free)):
        pinned = dict(fixed)
        pinned.update(zip(free, spins))
        m = oracle.conditional_marginal(s, u, pinned)[X[u]]
        best = m if best is None else min(best, m)
    return best


def test_mu_min_examples():
    hc = hardcore_instance(path(3), "1")
    assert mu_min(hc, {1}, 1, [0, 0, 0], 1) == Fraction(4, 5)
    col = coloring_instance(path(3), 3).converted("rational")
    assert mu_min(col, {0}, 0, [0, 1, 0], 1) == Fraction(1, 4)
    assert mu_min(independent_system(4, 3), {1}, 1, [0, 2, 1, 0], 1) == pytest.approx(1 / 3)


def test_mu_min_current_boundary_value():
    col = coloring_instance(path(3), 3).converted("rational")
    ctx = FilterContext.build(col, {0}, 0, [0, 1, 0], 1)
    assert ctx.current() == Fraction(1, 2)
    value, row = ctx.minimum()
    assert value == Fraction(1, 4) and int(row[0]) in (1, 2)


def test_mu_low_examples():
    hc = hardcore_instance(path(3), "1")
    # sphere of radius 2 around vertex 0 is {2}; the free boundary is {2}
    ref = oracle.conditional_marginal(hc, 0, {2: 0})[0]
    assert mu_low(hc, {0}, 0, [0, 0, 0], 1) == Fraction(4, 5) * ref
    ind = independent_system(5, 3)
    m = 1  # sphere of radius 2 around an endpoint of a path
    assert mu_low(ind, {0}, 0, [0] * 5, 1) == pytest.approx((1 - 1 / (5 * m)) / 3)
    assert mu_low(ind, {2}, 2, [0] * 5, 1) == pytest.approx((1 - 1 / 10) / 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mu_min_matches_oracle_and_bounds_current(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    q = int(rng.integers(2, 4))
    hard = seed % 2 == 0
    s = random_instance(rng, n, q + (2 if hard else 0), p=0.5, hard=hard)
    X = oracle_feasible(s, rng)
    R = {v for v in range(n) if rng.random() < 0.5} or {0}
    u = sorted(R)[int(rng.integers(len(R)))]
    ell = int(rng.integers(1, 3))
    m = mu_min(s, R, u, X, ell)
    assert m == pytest.approx(oracle_mu_min(s, R, u, X, ell), abs=1e-12)
    ctx = FilterContext.build(s, R, u, X, ell)
    assert m <= ctx.current() * (1 + 1e-12)
    assert ctx.lower_bound() <= m * (1 + 1e-12)
    if is_permissive(s):
        assert m > 0


def oracle_feasible(s, rng):
    dist = oracle.distribution(s)
    keys = sorted(dist)
    return list(keys[int(rng.integers(len(keys)))])


def test_mu_min_positive_and_bounded_on_golden(golden):
    for name, s, ells in golden:
        for ell in ells:
            if ell == 0:
                continue
            for X in brute_force_distribution(s).outcomes[:12]:
                for mask in range(1, 1 << s.n):
                    R = {v for v in range(s.n) if mask >> v & 1}
                    for u in R:
                        ctx = FilterContext.build(s, R, u, X, ell)
                        m = ctx.minimum()[0]
                        assert 0 < m <= ctx.current() * (1 + 1e-12), name


def test_mu_min_rational_exact_against_oracle():
    s = random_instance(np.random.default_rng(99), 5, 3).converted("rational")
    X = [0, 1, 2, 0, 1]
    for R in ({0}, {1, 3}, {0, 2, 4}):
        for u in R:
            assert mu_min(s, R, u, X, 1) == oracle_mu_min(s, R, u, X, 1)


# --- symmetry reduction -----------------------------------------------------


def test_spin_classes_of_colorings_and_fields():
    assert spin_classes(coloring_instance(cycle(4), 4)) == [[0, 1, 2, 3]]
    lists = [[0, 1, 2], [0, 1, 2, 3]]
    classes = spin_classes(coloring_instance(path(2), 4, lists))
    assert sorted(map(sorted, classes)) == [[0, 1, 2], [3]]
    assert sorted(map(sorted, spin_classes(ising_instance(path(2), 0.5, (1.0, 2.0))))) == [[0], [1]]


def test_canonical_assignments_cover_every_orbit():
    q, k = 4, 4
    classes = [[0, 1, 2, 3]]
    rows = np.concatenate(list(canonical_assignments(k, q, classes, {1})))

    def canon(t):
        # relabel non-distinguished spins by first appearance
        mapping, nxt, out = {1: 1}, iter([0, 2, 3]), []
        for a in t:
            if a not in mapping:
                mapping[a] = next(nxt)
            out.append(mapping[a])
        return tuple(out)

    orbits = {canon(t) for t in itertools.product(range(q), repeat=k)}
    assert {canon(tuple(r)) for r in rows} == orbits
    assert len(rows) == len(orbits)


@pytest.mark.parametrize("q,classes,distinguished", [
    (2, [[0, 1]], {0}),
    (2, [[0, 1]], {1}),
    (3, [[0, 1, 2]], {0, 2}),
    (4, [[0, 1], [2, 3]], {1}),
    (5, [[0, 1, 2], [3, 4]], {2, 3}),
    (3, [[0], [1], [2]], set()),
])
def test_canonical_assignments_against_brute_orbits(q, classes, distinguished):
    import itertools as it
    k = 3
    movable = [[a for a in cl if a not in distinguished] for cl in classes]
    perms = []
    for choice in it.product(*(it.permutations(m) for m in movable)):
        mapping = {a: a for a in range(q)}
        for m, img in zip(movable, choice):
            mapping.update(zip(m, img))
        perms.append(mapping)
    orbit_of = {t: min(tuple(p[a] for a in t) for p in perms) for t in it.product(range(q), repeat=k)}
    rows = [tuple(r) for chunk in canonical_assignments(k, q, classes, distinguished) for r in chunk]
    assert len(rows) == len(set(orbit_of.values()))
    assert {orbit_of[r] for r in rows} == set(orbit_of.values())
    assert rows == sorted(rows)


def test_canonical_assignment_cap_counts_orbits():
    rows = list(canonical_assignments(8, 9, [list(range(9))], {0}, cap=1 << 24))
    assert sum(len(r) for r in rows) < 9 ** 8
    with pytest.raises(EnumerationCapExceeded):
        list(canonical_assignments(8, 9, [list(range(9))], {0}, cap=10))


# --- exact random primitives ------------------------------------------------


def test_uniform_below_big_range():
    rng = np.random.default_rng(0)
    n = 3 * (1 << 70) + 1
    draws = [uniform_below(n, rng) for _ in range(2000)]
    assert all(0 <= d < n for d in draws)
    assert abs(np.mean([d / n for d in draws]) - 0.5) < 0.05
    with pytest.raises(ValueError):
        uniform_below(0, rng)


def test_exact_index_and_bernoulli_frequencies():
    rng = np.random.default_rng(3)
    w = [Fraction(1, 3), Fraction(1, 6), 0, Fraction(1, 2)]
    counts = Counter(exact_index(w, rng) for _ in range(30000))
    assert counts[2] == 0
    res = chi_square_gof(counts, DiscreteDistribution((0, 1, 3), (Fraction(1, 3), Fraction(1, 6), Fraction(1, 2))))
    assert res.passes()
    hits = sum(exact_bernoulli(Fraction(2, 7), rng) for _ in range(30000))
    assert abs(hits / 30000 - 2 / 7) < 0.01
    assert exact_bernoulli(Fraction(1), rng) and not exact_bernoulli(Fraction(0), rng)


# --- the global oracle ------------------------------------------------------


def test_brute_force_examples():
    tri = brute_force_distribution(triangle_coloring(rational=True))
    assert len(tri) == 6 and set(tri.probs) == {Fraction(1, 6)}
    edgeless = SpinSystem(Graph(2, []), 2, np.ones((2, 2)), np.ones((2, 2)))
    assert brute_force_distribution(edgeless).probs == pytest.approx((0.25,) * 4)
    hc = brute_force_distribution(hardcore_instance(path(2), "2"))
    assert hc.as_dict() == {(0, 0): Fraction(1, 5), (0, 1): Fraction(2, 5), (1, 0): Fraction(2, 5)}


def test_brute_force_matches_oracle(golden):
    for name, s, _ in golden:
        got = brute_force_distribution(s).as_dict()
        want = oracle.distribution(s)
        assert set(got) == set(want), name
        for k in want:
            assert got[k] == pytest.approx(want[k], abs=1e-12), name


def test_discrete_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution((0, 1), (0.5, 0.6))
    with pytest.raises(ValueError):
        DiscreteDistribution((0, 0), (0.5, 0.5))
    with pytest.raises(ValueError):
        DiscreteDistribution((0, 1), (1.5, -0.5))
    with pytest.raises(ValueError):
        DiscreteDistribution((0, 1), (Fraction(1, 2), Fraction(1, 3)))
    d = DiscreteDistribution.from_weights(["a", "b", "c"], [1, 0, 3], drop_zero=True)
    assert d.outcomes == ("a", "c") and d.prob("b") == 0


def test_mu_min_matches_oracle_on_symmetric_instances(golden):
    # golden instances have interchangeable spins, which exercises the orbit reduction
    rng = np.random.default_rng(21)
    for name, s, ells in golden:
        outcomes = brute_force_distribution(s).outcomes
        for ell in ells:
            for _ in range(25):
                X = list(outcomes[int(rng.integers(len(outcomes)))])
                R = {v for v in range(s.n) if rng.random() < 0.5} or {0}
                u = sorted(R)[int(rng.integers(len(R)))]
                if ell == 0 and not s.is_soft():
                    continue
                assert mu_min(s, R, u, X, ell) == pytest.approx(oracle_mu_min(s, R, u, X, ell), abs=1e-12), name
