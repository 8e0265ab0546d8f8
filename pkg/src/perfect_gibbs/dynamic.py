"""Dynamic sampling: keep an exact sample exact after the instance changes.

An update replaces some vertex vectors and some edge matrices, possibly adding
new edges. Given ``X`` drawn from the old Gibbs distribution, the repair
greedily fixes ``X`` on the touched vertices ``D`` (reading only ``D`` and its
boundary), marks ``D`` plus its boundary as incorrect and runs the ordinary
repair loop on the new instance until nothing is left to fix.

If the updated instance is not permissive, the old spins next to ``D`` can
rule out every choice on ``D``; the repair then widens ``D`` by its boundary
until the greedy pass succeeds.
"""

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from sortedcontainers import SortedList

from .errors import DuplicateEdge, InfeasibleGreedyStep, InvalidUpdate, UnknownVertex
from .graph import boundary
from .sampler import RepairState, RunStats, SamplerConfig, _prepare, step
from .spin import SpinSystem, _is_rational_input, admissible_spin


@dataclass(frozen=True)
class UpdateBatch:
    """New vertex vectors and new or replacement edge matrices.

    Args:
        vertices: vertex -> replacement ``b`` vector.
        edges: vertex pair -> matrix. Pairs already in the graph are replaced,
            others are added. Listing the same pair twice (in either
            orientation) raises :class:`DuplicateEdge`.
    """

    vertices: Mapping = field(default_factory=dict)
    edges: Mapping = field(default_factory=dict)

    def __post_init__(self):
        canon = {}
        for (u, v), mat in dict(self.edges).items():
            u, v = int(u), int(v)
            if u == v:
                raise InvalidUpdate(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in canon:
                raise DuplicateEdge(f"edge {key} listed twice")
            canon[key] = mat
        object.__setattr__(self, "edges", canon)
        object.__setattr__(self, "vertices", {int(v): b for v, b in dict(self.vertices).items()})

    @property
    def touched(self) -> tuple:
        """``D``: updated vertices plus endpoints of updated edges, sorted."""
        d = set(self.vertices)
        for u, v in self.edges:
            d.update((u, v))
        return tuple(sorted(d))

    def is_empty(self) -> bool:
        return not self.vertices and not self.edges


def apply_update(sys: SpinSystem, upd: UpdateBatch) -> SpinSystem:
    """The updated instance; ``sys`` itself is left unchanged."""
    n = sys.n
    for v in upd.touched:
        if not 0 <= v < n:
            raise UnknownVertex(f"vertex {v} is not in 0..{n - 1}")
    if upd.is_empty():
        return sys
    rational = sys.rational or any(_is_rational_input(b) for b in upd.vertices.values()) or any(
        _is_rational_input(m) for m in upd.edges.values())
    new_edges = [e for e in upd.edges if e not in sys.edge_index]
    graph = sys.graph.with_edges(new_edges) if new_edges else sys.graph
    b = [list(row) for row in sys.b]
    for v, vec in upd.vertices.items():
        if len(vec) != sys.q:
            raise InvalidUpdate(f"vector for vertex {v} has length {len(vec)}, expected {sys.q}")
        b[v] = list(vec)
    mats = {e: sys.edge_matrices[k] for e, k in sys.edge_index.items()}
    mats.update(upd.edges)
    return SpinSystem(graph, sys.q, b, mats, rational=rational)


class _AccessLog:
    """Read/write recorder used to check the locality of the greedy repair."""

    def __init__(self):
        self.reads = set()
        self.writes = set()


def greedy_repair(sys: SpinSystem, X: list, D, log: _AccessLog | None = None) -> list:
    """Make ``X`` feasible for ``sys`` by rewriting it on ``D`` only.

    Vertices of ``D`` are visited in ascending order; each takes the lowest
    spin compatible with its weight vector, with its boundary neighbours and
    with the ``D`` vertices already rewritten. Returns a new list.
    """
    D = sorted(D)
    in_d = set(D)
    out = list(X)
    assigned = {}
    for v in D:
        view = {}
        for w in sys.graph.adjacency[v]:
            if w in in_d:
                if w in assigned:
                    view[w] = assigned[w]
            else:
                if log is not None:
                    log.reads.add(w)
                view[w] = X[w]
        a = admissible_spin(sys, v, view)
        if a is None:
            raise InfeasibleGreedyStep(v)
        assigned[v] = a
        out[v] = a
        if log is not None:
            log.writes.add(v)
    return out


def dynamic_sample_detailed(sys: SpinSystem, X, upd: UpdateBatch, cfg: SamplerConfig | None = None,
                            rng=None, log: _AccessLog | None = None):
    """Like :func:`dynamic_sample` but also returns ``(new_sys, stats)``."""
    cfg = cfg or SamplerConfig()
    new = _prepare(apply_update(sys, upd), cfg)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    D = upd.touched
    stats = RunStats(trace=[] if cfg.record_trace else None)
    if not D:
        return list(X), new, stats
    D = set(D)
    while True:
        try:
            Y = greedy_repair(new, list(X), D, log)
            break
        except InfeasibleGreedyStep:
            # The old spins around D leave no feasible completion. Widening D
            # by its boundary keeps every decision a function of X inside the
            # final incorrect set, so the conditional Gibbs property survives.
            grown = D | set(boundary(new.graph, D))
            if grown == D:
                raise
            D = grown
    dD = boundary(new.graph, D)
    state = RepairState(Y, SortedList(D | set(dD)), stats)
    while state.R:
        step(new, state, cfg, rng)
    return state.X, new, stats


def dynamic_sample(sys: SpinSystem, X, upd: UpdateBatch, cfg: SamplerConfig | None = None, rng=None) -> list:
    """Turn a sample ``X`` of ``sys`` into a sample of the updated instance.

    ``X`` must be distributed as the Gibbs distribution of ``sys`` for the
    output to be exact. For a non-permissive updated instance the greedy
    repair can get stuck on the old boundary spins; the touched set is then
    widened by its boundary and the repair retried. Raises
    :class:`InfeasibleGreedyStep` only when widening no longer helps.
    """
    return dynamic_sample_detailed(sys, X, upd, cfg, rng)[0]
