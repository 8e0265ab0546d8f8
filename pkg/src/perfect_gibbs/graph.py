"""Undirected simple graphs with distance queries (balls, spheres, boundaries).

Vertices are the dense integers ``0..n-1``. Every set-valued query returns a
sorted tuple so that iteration order, and hence seeded runs, is reproducible.
"""

from collections import deque
from functools import lru_cache
from typing import Iterable, Sequence


class Graph:
    """Immutable undirected simple graph.

    Args:
        n: number of vertices.
        edges: iterable of vertex pairs. Self-loops and duplicate edges are
            rejected.
    """

    __slots__ = ("n", "adjacency", "edges", "_edge_set", "__weakref__")

    def __init__(self, n: int, edges: Iterable[Sequence[int]] = ()):
        if n < 0:
            raise ValueError("vertex count must be nonnegative")
        adj = [set() for _ in range(n)]
        canon = []
        for e in edges:
            u, v = int(e[0]), int(e[1])
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside 0..{n - 1}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if v in adj[u]:
                raise ValueError(f"duplicate edge ({u}, {v})")
            adj[u].add(v)
            adj[v].add(u)
            canon.append((min(u, v), max(u, v)))
        self.n = n
        self.adjacency = tuple(tuple(sorted(a)) for a in adj)
        self.edges = tuple(sorted(canon))
        self._edge_set = frozenset(self.edges)

    def __repr__(self):
        return f"Graph(n={self.n}, m={len(self.edges)})"

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def neighbors(self, v: int) -> tuple:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_set

    def with_edges(self, new_edges: Iterable[Sequence[int]]) -> "Graph":
        """Return a copy of the graph with extra edges added."""
        return Graph(self.n, list(self.edges) + [tuple(e) for e in new_edges])

    def distances_from(self, u: int, radius: int | None = None) -> dict:
        """BFS distances from ``u``, truncated at ``radius`` when given."""
        dist = {u: 0}
        frontier = deque([u])
        while frontier:
            v = frontier.popleft()
            d = dist[v]
            if radius is not None and d >= radius:
                continue
            for w in self.adjacency[v]:
                if w not in dist:
                    dist[w] = d + 1
                    frontier.append(w)
        return dist

    def ball(self, u: int, radius: int) -> tuple:
        return ball(self, u, radius)

    def sphere(self, u: int, radius: int) -> tuple:
        return sphere(self, u, radius)

    def boundary(self, vertices: Iterable[int]) -> tuple:
        return boundary(self, vertices)


def _check_vertex(g: Graph, u: int):
    if not 0 <= u < g.n:
        raise ValueError(f"vertex {u} outside 0..{g.n - 1}")


@lru_cache(maxsize=1 << 16)
def _ball_cached(g: Graph, u: int, radius: int) -> tuple:
    return tuple(sorted(g.distances_from(u, radius)))


def ball(g: Graph, u: int, radius: int) -> tuple:
    """All vertices within graph distance ``radius`` of ``u`` (sorted)."""
    _check_vertex(g, u)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    return _ball_cached(g, u, radius)


def sphere(g: Graph, u: int, radius: int) -> tuple:
    """All vertices at graph distance exactly ``radius`` from ``u`` (sorted)."""
    _check_vertex(g, u)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    dist = g.distances_from(u, radius)
    return tuple(sorted(v for v, d in dist.items() if d == radius))


def boundary(g: Graph, vertices: Iterable[int]) -> tuple:
    """Vertices outside ``vertices`` adjacent to at least one of them (sorted)."""
    inside = set(vertices)
    out = set()
    for v in inside:
        _check_vertex(g, v)
        out.update(g.adjacency[v])
    out.difference_update(inside)
    return tuple(sorted(out))


def connected_component(g: Graph, start: int, allowed: set) -> tuple:
    """Component of ``start`` in the subgraph induced by ``allowed`` (sorted)."""
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in g.adjacency[v]:
            if w in allowed and w not in seen:
                seen.add(w)
                stack.append(w)
    return tuple(sorted(seen))


def induced_subgraph(g: Graph, vertices: Sequence[int]) -> tuple:
    """Induced subgraph on ``vertices`` plus the old-index list.

    Returns ``(subgraph, index)`` where ``index[i]`` is the original vertex that
    became vertex ``i``; vertices keep their relative order.
    """
    index = tuple(sorted(set(vertices)))
    pos = {v: i for i, v in enumerate(index)}
    edges = [(pos[u], pos[v]) for u, v in g.edges if u in pos and v in pos]
    return Graph(len(index), edges), index
