import math
from fractions import Fraction

import numpy as np
import pytest

from perfect_gibbs.graph import Graph
from perfect_gibbs.instances import coloring_instance, grid_graph, hardcore_instance, ising_instance
from perfect_gibbs.spin import SpinSystem

COLOR3 = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]


def path(n):
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle(n):
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def triangle_coloring(rational=False):
    b = [["1"] * 3] * 3 if rational else [[1] * 3] * 3
    return SpinSystem(cycle(3), 3, b, COLOR3)


def random_instance(rng, n, q, p=0.5, hard=False):
    """Random instance on G(n, p); hard instances keep permissiveness by
    zeroing only the diagonal of edge matrices and having q > max degree."""
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    g = Graph(n, edges)
    b = rng.uniform(0.2, 2.0, size=(n, q))
    mats = {}
    for e in g.edges:
        m = rng.uniform(0.2, 2.0, size=(q, q))
        m = (m + m.T) / 2
        if hard:
            np.fill_diagonal(m, 0.0)
        mats[e] = m
    return SpinSystem(g, q, b, mats)


def golden_suite():
    """Small instances (<= 8 vertices) with the radii they are sampled at."""
    ln2 = math.log(2)
    rng = np.random.default_rng(2024)
    return [
        ("triangle-q3", triangle_coloring(), (1, 2)),
        ("path3-q3", coloring_instance(path(3), 3), (1,)),
        ("star-q4", coloring_instance(Graph(4, [(0, 1), (0, 2), (0, 3)]), 4), (1,)),
        ("c4-hardcore", hardcore_instance(grid_graph(2, 2), 1.0), (1, 2)),
        ("path3-hardcore", hardcore_instance(path(3), 1.0), (1,)),
        ("edge-hardcore-2", hardcore_instance(path(2), 2.0), (1,)),
        ("edge-ising", ising_instance(path(2), ln2), (0, 1)),
        ("c3-ising", ising_instance(cycle(3), ln2), (0, 1)),
        ("c5-ising-field", ising_instance(cycle(5), 0.4, (1.0, 2.0)), (0, 1, 2)),
        ("soft-random", random_instance(rng, 5, 3), (0, 1)),
        ("hard-random", random_instance(rng, 5, 5, p=0.5, hard=True), (1,)),
    ]


@pytest.fixture(scope="session")
def golden():
    return golden_suite()


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str):
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
