"""Keep a perfect sample current while the instance changes.

A hardcore sample on a 12x12 grid is repaired after one edge is softened;
the repair touches a handful of vertices while a fresh run visits them all.
Run with ``python3 demos/dynamic_update.py``.
"""

import numpy as np

from perfect_gibbs.dynamic import UpdateBatch, dynamic_sample_detailed
from perfect_gibbs.instances import grid_graph, hardcore_instance
from perfect_gibbs.sampler import SamplerConfig, run_detailed

if __name__ == "__main__":
    rng = np.random.default_rng(1)
    cfg = SamplerConfig(ell=1, check_invariants=False)
    sys = hardcore_instance(grid_graph(12, 12), 0.1)
    X, st = run_detailed(sys, cfg, rng)
    print(f"fresh sample: {st.iterations} iterations, {sum(X)} occupied sites")
    for k in range(5):
        c = int(rng.integers(sys.n - 1))
        if not sys.graph.has_edge(c, c + 1):
            continue
        upd = UpdateBatch({}, {(c, c + 1): [[1, 1], [1, 0.5]]})
        X, sys, stats = dynamic_sample_detailed(sys, X, upd, cfg, rng)
        print(f"update {k}: edge ({c}, {c + 1}) softened, repair took {stats.iterations} iterations")
