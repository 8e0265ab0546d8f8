"""Plain-Python reference computations, independent of the package internals."""

import itertools
from fractions import Fraction


def weight(sys, sigma):
    w = 1
    for v in range(sys.n):
        w *= sys.b[v][sigma[v]]
    for k, (u, v) in enumerate(sys.graph.edges):
        w *= sys.edge_matrices[k][sigma[u]][sigma[v]]
    return w


def distribution(sys):
    """Exact Gibbs probabilities of all positive-weight configurations."""
    table = {}
    for sigma in itertools.product(range(sys.q), repeat=sys.n):
        w = weight(sys, sigma)
        if w > 0:
            table[sigma] = w
    z = sum(table.values())
    return {s: w / z for s, w in table.items()}


def conditional_marginal(sys, v, pinned):
    """Law of ``v`` given ``pinned``, edges inside the pinned set excluded."""
    free = [w for w in range(sys.n) if w not in pinned]
    acc = [0] * sys.q
    for tau in itertools.product(range(sys.q), repeat=len(free)):
        full = dict(pinned)
        full.update(zip(free, tau))
        w = 1
        for x in free:
            w *= sys.b[x][full[x]]
        for k, (a, c) in enumerate(sys.graph.edges):
            if a in pinned and c in pinned:
                continue
            w *= sys.edge_matrices[k][full[a]][full[c]]
        acc[full[v]] += w
    z = sum(acc)
    if not z > 0:
        raise ZeroDivisionError("zero conditional partition")
    return [x / z for x in acc]


def matchings(g):
    out = []
    edges = list(g.edges)
    for r in range(len(edges) + 1):
        for combo in itertools.combinations(edges, r):
            ends = [x for e in combo for x in e]
            if len(ends) == len(set(ends)):
                out.append(combo)
    return out


def independent_sets(g):
    out = []
    for mask in range(1 << g.n):
        chosen = [v for v in range(g.n) if mask >> v & 1]
        if all(not (mask >> u & 1 and mask >> v & 1) for u, v in g.edges):
            out.append(tuple(chosen))
    return out


def as_fraction(x):
    return x if isinstance(x, Fraction) else Fraction(x)
