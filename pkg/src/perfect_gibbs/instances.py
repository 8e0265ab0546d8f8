"""Builders for concrete models, graph generators and the radius solver."""

import math
from fractions import Fraction
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateTorus, EmptyEdgeSet
from .graph import Graph, sphere
from .spin import SpinSystem

# positive root of x**x = e, i.e. of x log x = 1
ALPHA_STAR = brentq(lambda x: x * math.log(x) - 1.0, 1.5, 2.0, xtol=1e-15)
BETA_MIN = math.sqrt(2) / (math.sqrt(2) - 1)


def proper_coloring_matrix(q: int) -> np.ndarray:
    return np.ones((q, q)) - np.eye(q)


def coloring_instance(g: Graph, q: int, lists: Sequence | None = None) -> SpinSystem:
    """List-coloring instance: ``b_v`` is the indicator of ``L_v``.

    Args:
        g: the graph.
        q: number of colors.
        lists: per-vertex allowed colors; ``None`` gives every vertex all
            ``q`` colors.
    """
    if lists is None:
        lists = [range(q)] * g.n
    if len(lists) != g.n:
        raise ValueError("need one list per vertex")
    b = np.zeros((g.n, q))
    for v, lv in enumerate(lists):
        lv = list(lv)
        if not lv:
            raise ValueError(f"list of vertex {v} is empty")
        if any(not 0 <= a < q for a in lv):
            raise ValueError(f"list of vertex {v} has a color outside 0..{q - 1}")
        b[v, lv] = 1.0
    return SpinSystem(g, q, b, proper_coloring_matrix(q))


@dataclass(frozen=True)
class ColoringReport:
    """Which sufficient conditions a list-coloring instance meets.

    ``condition2_double`` is the branch ``|L_v| >= 2 deg(v)``;
    ``condition2_triangle_free`` the triangle-free branch with
    ``alpha > ALPHA_STAR`` and ``beta >= BETA_MIN``; ``condition3`` is
    ``|L_v| >= Delta**2 - Delta + 2``.
    """

    max_degree: int
    min_list_size: int
    triangle_free: bool
    condition2_double: bool
    condition2_triangle_free: bool
    condition3: bool

    @property
    def condition2(self) -> bool:
        return self.condition2_double or self.condition2_triangle_free


def has_triangle(g: Graph) -> bool:
    nbr = [set(a) for a in g.adjacency]
    return any(nbr[u] & nbr[v] for u, v in g.edges)


def _beta_inequality(alpha: float, beta: float) -> bool:
    c = 1.0 - 1.0 / beta
    return c * alpha * math.exp(c / alpha) > 1.0


def check_coloring_conditions(g: Graph, lists: Sequence, alpha: float | None = None,
                              beta: float | None = None) -> ColoringReport:
    """Evaluate the list-coloring conditions on one instance.

    When ``alpha`` and ``beta`` are given, the triangle-free branch is tested
    with exactly those constants. Otherwise the branch holds if some admissible
    pair exists; the pair found is not reported.
    """
    sizes = [len(set(lv)) for lv in lists]
    if len(sizes) != g.n:
        raise ValueError("need one list per vertex")
    degs = [g.degree(v) for v in range(g.n)]
    delta = max(degs, default=0)
    tri_free = not has_triangle(g)
    double = all(s >= 2 * d for s, d in zip(sizes, degs))
    cond3 = all(s >= delta * delta - delta + 2 for s in sizes)

    def branch_holds(a, b):
        return (a > ALPHA_STAR and b >= BETA_MIN and _beta_inequality(a, b)
                and all(s >= a * d + b for s, d in zip(sizes, degs)))

    if not tri_free:
        second = False
    elif alpha is not None and beta is not None:
        second = branch_holds(alpha, beta)
    else:
        second = False
        # the inequality is increasing in both constants, so for each alpha
        # the largest beta the lists allow is the best candidate
        for a in np.linspace(ALPHA_STAR, ALPHA_STAR + 8.0, 4001)[1:]:
            b = min((s - a * d for s, d in zip(sizes, degs)), default=math.inf)
            if math.isinf(b):
                b = BETA_MIN * 2
            if branch_holds(a, b):
                second = True
                break
    return ColoringReport(delta, min(sizes, default=0), tri_free, double, second, cond3)


def hardcore_instance(g: Graph, lam) -> SpinSystem:
    """Hardcore model: spin 1 is occupied, ``b_v = (1, lam)``, no two adjacent occupied.

    A ``Fraction`` or decimal-string ``lam`` gives an exact rational instance.
    """
    if isinstance(lam, str):
        lam = Fraction(lam.strip())
    if not lam > 0:
        raise ValueError("fugacity must be positive")
    one = Fraction(1) if isinstance(lam, Fraction) else 1.0
    b = [[one, lam] for _ in range(g.n)]
    return SpinSystem(g, 2, b, [[one, one], [one, 0 * one]])


def ising_instance(g: Graph, coupling: float, field=(1.0, 1.0)) -> SpinSystem:
    """Ising model with edge matrix ``[[e^c, e^-c], [e^-c, e^c]]``.

    Args:
        g: the graph.
        coupling: the interaction ``c``; zero gives a product measure.
        field: vertex weight pair used at every vertex, or one pair per vertex.
    """
    if not math.isfinite(coupling):
        raise ValueError("coupling must be finite")
    f = np.asarray(field, dtype=np.float64)
    b = np.broadcast_to(f, (g.n, 2)) if f.ndim == 1 else f
    hi, lo = math.exp(coupling), math.exp(-coupling)
    return SpinSystem(g, 2, b, [[hi, lo], [lo, hi]])


def line_graph(g: Graph):
    """Line graph of ``g`` and its vertex-to-edge map.

    Vertex ``i`` of the line graph is ``g.edges[i]`` (edges sorted by their
    endpoints); two vertices are adjacent when the edges share an endpoint.
    """
    if not g.edges:
        raise EmptyEdgeSet("the line graph of an edgeless graph is empty")
    edge_map = tuple(g.edges)
    incident = [[] for _ in range(g.n)]
    for i, (u, v) in enumerate(edge_map):
        incident[u].append(i)
        incident[v].append(i)
    adj = set()
    for ids in incident:
        for a in range(len(ids)):
            for c in range(a + 1, len(ids)):
                adj.add((ids[a], ids[c]))
    return Graph(len(edge_map), sorted(adj)), edge_map


def monomer_dimer_instance(g: Graph, lam):
    """Monomer-dimer model on ``g`` as a hardcore model on its line graph.

    Returns ``(sys, edge_map)``; use :func:`decode_matching` on samples.
    """
    lg, edge_map = line_graph(g)
    return hardcore_instance(lg, lam), edge_map


def decode_matching(edge_map: Sequence, config: Sequence[int]) -> tuple:
    """Edges whose line-graph vertex is occupied."""
    return tuple(e for e, s in zip(edge_map, config) if s == 1)


def is_matching(edges: Sequence) -> bool:
    seen = set()
    for u, v in edges:
        if u in seen or v in seen:
            return False
        seen.update((u, v))
    return True


def grid_graph(width: int, height: int, torus: bool = False) -> Graph:
    """4-neighbour grid; vertex ``(x, y)`` is ``y * width + x``."""
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be positive")
    if torus and (width < 3 or height < 3):
        raise DegenerateTorus("a torus needs both sides at least 3 to stay simple")
    edges = []
    for y in range(height):
        for x in range(width):
            v = y * width + x
            if x + 1 < width:
                edges.append((v, v + 1))
            elif torus:
                edges.append((v, y * width))
            if y + 1 < height:
                edges.append((v, v + width))
            elif torus:
                edges.append((v, x))
    return Graph(width * height, edges)


def erdos_renyi(n: int, p: float, seed: int = 0) -> Graph:
    """G(n, p) random graph from a seeded generator."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return Graph(n, list(zip(iu[keep].tolist(), ju[keep].tolist())))


def empirical_growth(g: Graph, max_radius: int) -> list:
    """``s[l]`` = largest sphere of radius ``l`` over all centres of ``g``."""
    s = [0] * (max_radius + 1)
    for v in range(g.n):
        dist = g.distances_from(v, max_radius)
        counts = np.bincount(list(dist.values()), minlength=max_radius + 1)
        s = [max(a, int(c)) for a, c in zip(s, counts)]
    return s


def lattice_growth(d: int) -> Callable[[int], int]:
    """Exact sphere sizes of the infinite lattice ``Z^d``."""

    def s(ell: int) -> int:
        if ell == 0:
            return 1
        return sum(2 ** k * math.comb(d, k) * math.comb(ell - 1, k - 1) for k in range(1, min(d, ell) + 1))

    return s


def solve_ell0(q: int, alpha: float, beta: float, s, ell_max: int) -> int | None:
    """Smallest ``ell0`` in ``[2, ell_max]`` with
    ``alpha * exp(-beta * floor(ell0/2)) <= 1 / (50 q s(floor(ell0/2)) s(ell0))``.

    ``s`` is a callable or an indexable of sphere-size bounds. Returns
    ``None`` when no radius qualifies. The sampler then uses ``ell0 - 1``.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    size = s if callable(s) else (lambda ell: s[ell])
    for ell0 in range(2, ell_max + 1):
        half = ell0 // 2
        lhs = math.log(alpha) - beta * half
        rhs = -math.log(50 * q * size(half) * size(ell0))
        if lhs <= rhs:
            return ell0
    return None
