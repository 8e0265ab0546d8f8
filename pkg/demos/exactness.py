"""Draw perfect samples of a small instance and compare them with enumeration.

Run with ``python3 demos/exactness.py``.
"""

from collections import Counter

import numpy as np

from perfect_gibbs.diagnostics import chi_square_gof, empirical, tv_distance
from perfect_gibbs.graph import Graph
from perfect_gibbs.instances import coloring_instance, hardcore_instance, grid_graph
from perfect_gibbs.local import brute_force_distribution
from perfect_gibbs.sampler import SamplerConfig, run


def check(name, sys, n_samples=20_000, seed=0):
    rng = np.random.default_rng(seed)
    cfg = SamplerConfig(ell=1, check_invariants=False)
    samples = [tuple(run(sys, cfg, rng)) for _ in range(n_samples)]
    exact = brute_force_distribution(sys)
    res = chi_square_gof(Counter(samples), exact)
    tv = tv_distance(empirical(samples), exact)
    print(f"{name:28s} outcomes={len(exact):3d}  p={res.p_value:.3f}  tv={tv:.4f}")


if __name__ == "__main__":
    check("3-coloring of a 4-path", coloring_instance(Graph(4, [(0, 1), (1, 2), (2, 3)]), 3))
    check("hardcore on a 2x3 grid", hardcore_instance(grid_graph(2, 3), 1.5))
    check("4-coloring of a 5-cycle", coloring_instance(Graph(5, [(i, (i + 1) % 5) for i in range(5)]), 4))
