from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perfect_gibbs.errors import EnumerationCapExceeded, InfeasibleGreedyStep
from perfect_gibbs.graph import Graph
from perfect_gibbs.instances import coloring_instance, hardcore_instance, ising_instance
from perfect_gibbs.spin import (NumericMode, PartialConfiguration, SpinSystem, conditional_partition,
                                conditional_weight, enumeration_cap, greedy_feasible, is_feasible,
                                is_permissive, partition_function, weight)

import oracle
from conftest import COLOR3, cycle, path, random_instance, triangle_coloring


def test_weight_single_vertex():
    s = SpinSystem(Graph(1, []), 2, [[2, 3]], [[1, 1], [1, 1]])
    assert weight(s, [0]) == 2
    assert weight(s, [1]) == 3


def test_weight_antiferro_edge():
    s = SpinSystem(path(2), 2, [[1, 1]] * 2, [[0, 1], [1, 0]])
    assert weight(s, [0, 0]) == 0
    assert weight(s, [0, 1]) == 1


def test_weight_triangle_coloring():
    s = triangle_coloring()
    assert weight(s, [0, 1, 2]) == 1
    assert weight(s, [0, 0, 1]) == 0


def test_conditional_weight_excludes_edges_inside_pinned_set():
    s = triangle_coloring()
    assert conditional_weight(s, {0: 0, 1: 0}, {2: 1}) == 1


def test_conditional_weight_empty_pin_is_weight():
    s = triangle_coloring()
    for sigma in [(0, 1, 2), (0, 0, 1), (2, 1, 0)]:
        assert conditional_weight(s, {}, dict(enumerate(sigma))) == weight(s, sigma)


def test_conditional_weight_edgeless():
    s = SpinSystem(Graph(3, []), 2, [[1, 2], [3, 4], [5, 6]], np.ones((2, 2)))
    assert conditional_weight(s, {0: 1}, {1: 0, 2: 1}) == 3 * 6


def test_conditional_partition_examples():
    s = SpinSystem(Graph(1, []), 2, [[2, 3]], np.ones((2, 2)))
    assert conditional_partition(s, {}) == 5
    assert conditional_partition(triangle_coloring(), {}) == 6
    assert partition_function(hardcore_instance(path(3), 1)) == 5


def test_conditional_partition_cap():
    s = coloring_instance(path(10), 3)
    with pytest.raises(EnumerationCapExceeded):
        conditional_partition(s, {}, cap=1000)


def test_enumeration_cap_env(monkeypatch):
    monkeypatch.setenv("PERFECT_GIBBS_CAP", "77")
    assert enumeration_cap() == 77


def test_feasibility():
    s = triangle_coloring()
    assert is_feasible(s, [0, 1, 2])
    assert not is_feasible(s, [0, 0, 2])
    ising = ising_instance(cycle(3), 0.3)
    assert all(is_feasible(ising, [a, b, c]) for a in (0, 1) for b in (0, 1) for c in (0, 1))
    assert is_feasible(hardcore_instance(path(4), 2.0), [0, 0, 0, 0])


def test_permissive_triangle():
    assert is_permissive(triangle_coloring())
    k3_q2 = SpinSystem(cycle(3), 2, np.ones((3, 2)), [[0, 1], [1, 0]])
    assert not is_permissive(k3_q2)
    assert is_permissive(hardcore_instance(cycle(5), 3.0))


def test_permissive_matches_oracle_on_small_instances():
    rng = np.random.default_rng(11)
    for trial in range(15):
        s = random_instance(rng, 4, int(rng.integers(2, 4)), p=0.6, hard=True)
        expected = True
        import itertools
        for mask in range(1 << s.n):
            pinned = [v for v in range(s.n) if mask >> v & 1]
            free = [v for v in range(s.n) if not mask >> v & 1]
            for spins in itertools.product(range(s.q), repeat=len(pinned)):
                sigma = dict(zip(pinned, spins))
                z = sum(conditional_weight(s, sigma, dict(zip(free, t)))
                        for t in itertools.product(range(s.q), repeat=len(free)))
                if not z > 0:
                    expected = False
        assert is_permissive(s) == expected


def test_greedy_examples():
    assert greedy_feasible(triangle_coloring()) == [0, 1, 2]
    assert greedy_feasible(hardcore_instance(cycle(6), 1.0)) == [0] * 6
    assert greedy_feasible(ising_instance(cycle(4), 0.7)) == [0] * 4
    lists = [[0, 1], [1], [1, 2]]
    s = coloring_instance(path(3), 3, lists)
    assert greedy_feasible(s) == [0, 1, 2]


def test_greedy_raises_when_stuck():
    s = coloring_instance(path(2), 2, [[0], [0]])
    with pytest.raises(InfeasibleGreedyStep):
        greedy_feasible(s)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_greedy_is_feasible_on_colorings_with_enough_colors(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.4]
    g = Graph(n, edges)
    s = coloring_instance(g, max(2, g.max_degree + 1))
    assert is_feasible(s, greedy_feasible(s))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weight_matches_oracle_and_partition_dominates(seed):
    rng = np.random.default_rng(seed)
    s = random_instance(rng, 5, 3, hard=bool(seed % 2))
    z = partition_function(s)
    total = 0.0
    for _ in range(5):
        sigma = [int(x) for x in rng.integers(0, 3, size=5)]
        w = weight(s, sigma)
        assert w == pytest.approx(oracle.weight(s, sigma), rel=1e-12)
        assert conditional_weight(s, {}, dict(enumerate(sigma))) == pytest.approx(w, rel=1e-12)
        assert z >= w
    pinned = {0: int(rng.integers(3)), 3: int(rng.integers(3))}
    zc = conditional_partition(s, pinned)
    assert zc >= conditional_weight(s, pinned, {1: 0, 2: 0, 4: 0})


def test_rational_mode_is_exact():
    s = SpinSystem(path(3), 2, [["1", "1/3"]] * 3, [["1", "1"], ["1", "0"]])
    assert s.numeric_mode is NumericMode.RATIONAL
    assert partition_function(s) == Fraction(1) + 3 * Fraction(1, 3) + Fraction(1, 9)
    f = s.converted("f64")
    assert f.numeric_mode is NumericMode.FLOAT64
    assert partition_function(f) == pytest.approx(float(partition_function(s)), rel=1e-12)
    back = f.converted(NumericMode.RATIONAL)
    assert back.rational


def test_spin_system_validation():
    with pytest.raises(ValueError):
        SpinSystem(path(2), 2, [[1, 1]] * 2, [[1, 2], [3, 1]])
    with pytest.raises(ValueError):
        SpinSystem(path(2), 2, [[0, 0], [1, 1]], np.ones((2, 2)))
    with pytest.raises(ValueError):
        SpinSystem(path(2), 2, [[1, -1], [1, 1]], np.ones((2, 2)))
    with pytest.raises(ValueError):
        SpinSystem(path(2), 1, [[1], [1]], [[1]])
    with pytest.raises(ValueError):
        SpinSystem(path(2), 2, [[1, 1]] * 2, {(0, 1): np.ones((2, 2)), (0, 2): np.ones((2, 2))})


def test_partial_configuration():
    p = PartialConfiguration({3: 1, 0: 2})
    assert p.domain == (0, 3)
    assert list(p) == [0, 3]
    assert dict(p.merged({1: 0})) == {0: 2, 1: 0, 3: 1}
    with pytest.raises(ValueError):
        p.merged({0: 1})
    assert dict(PartialConfiguration.restrict([5, 6, 7], [2, 0])) == {0: 5, 2: 7}
