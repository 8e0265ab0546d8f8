"""Spin-system data model: weights, conditional weights and permissiveness.

A spin system is a graph with a nonnegative weight vector ``b[v]`` of length
``q`` on every vertex and a symmetric nonnegative ``q x q`` matrix on every
edge. Weights are stored either as ``float64`` arrays or, for exact
verification, as object arrays of :class:`fractions.Fraction`.
"""

import enum
import itertools
import os
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EnumerationCapExceeded, InfeasibleGreedyStep
from .graph import Graph

DEFAULT_CAP = 1 << 24


def enumeration_cap(cap: int | None = None) -> int:
    """Resolve the enumeration cap: explicit value, then ``PERFECT_GIBBS_CAP``."""
    if cap is not None:
        return int(cap)
    env = os.environ.get("PERFECT_GIBBS_CAP")
    return int(env) if env else DEFAULT_CAP


def check_cap(states: int, cap: int | None = None):
    limit = enumeration_cap(cap)
    if states > limit:
        raise EnumerationCapExceeded(states, limit)


class NumericMode(enum.Enum):
    FLOAT64 = "f64"
    RATIONAL = "rational"

    @classmethod
    def parse(cls, value) -> "NumericMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x))


def _as_array(values, rational: bool) -> np.ndarray:
    if rational:
        flat = [_to_fraction(x) for x in np.asarray(values, dtype=object).ravel()]
        out = np.empty(len(flat), dtype=object)
        out[:] = flat
        return out.reshape(np.shape(values))
    arr = np.asarray(values, dtype=object)
    flat = [float(Fraction(x.strip())) if isinstance(x, str) else float(x) for x in arr.ravel()]
    return np.array(flat, dtype=np.float64).reshape(arr.shape)


def _is_rational_input(values) -> bool:
    arr = np.asarray(values, dtype=object).ravel()
    return any(isinstance(x, (Fraction, str)) for x in arr)


class SpinSystem:
    """A ``q``-state spin system on a graph.

    Args:
        graph: the underlying :class:`Graph`.
        q: number of spins (``>= 2``); spins are ``0..q-1``.
        b: ``n x q`` vertex weights.
        A: either one ``q x q`` matrix used for every edge, a mapping from
            edge pairs to matrices, or a sequence aligned with ``graph.edges``.
        rational: store weights as exact fractions. Defaults to ``True`` when
            any weight is given as a ``Fraction`` or decimal string.
    """

    def __init__(self, graph: Graph, q: int, b, A, rational: bool | None = None):
        if q < 2:
            raise ValueError("q must be at least 2")
        if rational is None:
            rational = _is_rational_input(b) or (
                not isinstance(A, Mapping) and _is_rational_input(A)
            ) or (isinstance(A, Mapping) and any(_is_rational_input(m) for m in A.values()))
        self.graph = graph
        self.q = int(q)
        self.rational = bool(rational)

        b_arr = _as_array(b, self.rational)
        if b_arr.shape != (graph.n, q):
            raise ValueError(f"b must have shape ({graph.n}, {q}), got {b_arr.shape}")

        m = len(graph.edges)
        dtype = object if self.rational else np.float64
        mats = np.empty((m, q, q), dtype=dtype)
        if isinstance(A, Mapping):
            lookup = {(min(e), max(e)): mat for e, mat in A.items()}
            missing = [e for e in graph.edges if e not in lookup]
            if missing:
                raise ValueError(f"no matrix given for edges {missing[:5]}")
            extra = set(lookup) - set(graph.edges)
            if extra:
                raise ValueError(f"matrices given for non-edges {sorted(extra)[:5]}")
            for k, e in enumerate(graph.edges):
                mats[k] = _as_array(lookup[e], self.rational)
        elif np.ndim(np.asarray(A, dtype=object)) == 2:
            single = _as_array(A, self.rational)
            for k in range(m):
                mats[k] = single
        else:
            seq = list(A)
            if len(seq) != m:
                raise ValueError("edge matrix sequence must align with graph.edges")
            for k, mat in enumerate(seq):
                mats[k] = _as_array(mat, self.rational)

        self.b = b_arr
        self.edge_matrices = mats
        self.edge_index = {e: k for k, e in enumerate(graph.edges)}
        self._validate()
        self.b.setflags(write=False)
        self.edge_matrices.setflags(write=False)
        # per-vertex (neighbor, matrix) pairs in ascending neighbor order
        self.incident = tuple(
            tuple((w, mats[self.edge_index[(min(v, w), max(v, w))]]) for w in graph.adjacency[v])
            for v in range(graph.n)
        )

    def _validate(self):
        q = self.q
        for v in range(self.graph.n):
            row = self.b[v]
            if any(not _finite_nonneg(x) for x in row):
                raise ValueError(f"b[{v}] must be finite and nonnegative")
            if not any(x > 0 for x in row):
                raise ValueError(f"b[{v}] has no positive entry")
        for k, e in enumerate(self.graph.edges):
            mat = self.edge_matrices[k]
            for i in range(q):
                for j in range(q):
                    if not _finite_nonneg(mat[i, j]):
                        raise ValueError(f"matrix on edge {e} must be finite and nonnegative")
                    if mat[i, j] != mat[j, i]:
                        raise ValueError(f"matrix on edge {e} is not symmetric")
            if not any(mat[i, j] > 0 for i in range(q) for j in range(q)):
                raise ValueError(f"matrix on edge {e} has no positive entry")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def numeric_mode(self) -> NumericMode:
        return NumericMode.RATIONAL if self.rational else NumericMode.FLOAT64

    def edge_matrix(self, u: int, v: int) -> np.ndarray:
        """Interaction matrix of edge ``{u, v}`` (symmetric, so orientation-free)."""
        return self.edge_matrices[self.edge_index[(min(u, v), max(u, v))]]

    def is_soft(self) -> bool:
        """True when every vertex and edge weight is strictly positive."""
        return bool(all(x > 0 for x in self.b.ravel()) and all(x > 0 for x in self.edge_matrices.ravel()))

    def zero(self):
        return Fraction(0) if self.rational else 0.0

    def one(self):
        return Fraction(1) if self.rational else 1.0

    def converted(self, mode) -> "SpinSystem":
        """Same instance in another numeric mode (floats convert exactly)."""
        mode = NumericMode.parse(mode)
        want = mode is NumericMode.RATIONAL
        if want == self.rational:
            return self
        return SpinSystem(self.graph, self.q, self.b.tolist(), list(self.edge_matrices), rational=want)

    def __repr__(self):
        kind = "rational" if self.rational else "f64"
        return f"SpinSystem(n={self.n}, m={len(self.graph.edges)}, q={self.q}, {kind})"


def _finite_nonneg(x) -> bool:
    if isinstance(x, Fraction):
        return x >= 0
    return bool(np.isfinite(x) and x >= 0)


class PartialConfiguration(Mapping):
    """An assignment of spins to a subset of vertices.

    Behaves as a read-only mapping ``vertex -> spin`` iterated in ascending
    vertex order.
    """

    __slots__ = ("_spins", "_domain")

    def __init__(self, spins: Mapping[int, int] | Iterable = ()):
        items = spins.items() if isinstance(spins, Mapping) else spins
        d = {int(v): int(s) for v, s in items}
        self._spins = d
        self._domain = tuple(sorted(d))

    @classmethod
    def restrict(cls, config: Sequence[int], vertices: Iterable[int]) -> "PartialConfiguration":
        return cls({v: config[v] for v in vertices})

    @property
    def domain(self) -> tuple:
        return self._domain

    def __getitem__(self, v):
        return self._spins[v]

    def __iter__(self):
        return iter(self._domain)

    def __len__(self):
        return len(self._domain)

    def __repr__(self):
        return f"PartialConfiguration({dict((v, self._spins[v]) for v in self._domain)})"

    def merged(self, other: Mapping[int, int]) -> "PartialConfiguration":
        overlap = set(self._spins) & set(other)
        if overlap:
            raise ValueError(f"domains overlap on {sorted(overlap)}")
        d = dict(self._spins)
        d.update(other)
        return PartialConfiguration(d)


def _check_full(sys: SpinSystem, sigma: Sequence[int]):
    if len(sigma) != sys.n:
        raise ValueError(f"configuration has length {len(sigma)}, expected {sys.n}")


def weight(sys: SpinSystem, sigma: Sequence[int]):
    """Product of all vertex and edge factors of a full configuration."""
    _check_full(sys, sigma)
    w = sys.one()
    for v in range(sys.n):
        w = w * sys.b[v, sigma[v]]
        if not w:
            return sys.zero()
    for k, (u, v) in enumerate(sys.graph.edges):
        w = w * sys.edge_matrices[k, sigma[u], sigma[v]]
        if not w:
            return sys.zero()
    return w


def is_feasible(sys: SpinSystem, sigma: Sequence[int]) -> bool:
    return weight(sys, sigma) > 0


def conditional_weight(sys: SpinSystem, sigma: Mapping[int, int], tau: Mapping[int, int]):
    """Weight of ``tau`` on ``V \\ dom(sigma)`` conditional on ``sigma``.

    Vertex factors and edges inside the free region count, as do edges
    crossing between ``sigma`` and ``tau``; edges with both endpoints pinned by
    ``sigma`` are excluded.
    """
    free = set(tau)
    pinned = set(sigma)
    if free & pinned or len(free) + len(pinned) != sys.n:
        raise ValueError("domains of sigma and tau must partition the vertex set")
    w = sys.one()
    for v in free:
        w = w * sys.b[v, tau[v]]
    for k, (u, v) in enumerate(sys.graph.edges):
        mat = sys.edge_matrices[k]
        if u in free and v in free:
            w = w * mat[tau[u], tau[v]]
        elif u in free:
            w = w * mat[tau[u], sigma[v]]
        elif v in free:
            w = w * mat[sigma[u], tau[v]]
    return w


def conditional_weight_tensor(sys: SpinSystem, free: Sequence[int], sigma: Mapping[int, int]) -> np.ndarray:
    """Conditional weights of every ``tau`` on ``free`` as a ``(q,)*k`` array.

    Axis ``i`` indexes the spin of ``free[i]``. Only edges touching ``free``
    contribute; pinned neighbours outside ``sigma`` are not allowed.
    """
    q = sys.q
    k = len(free)
    pos = {v: i for i, v in enumerate(free)}
    dtype = object if sys.rational else np.float64
    out = np.empty((q,) * k, dtype=dtype)
    out[...] = sys.one()
    for v, i in pos.items():
        shape = [1] * k
        shape[i] = q
        factor = sys.b[v].reshape(shape)
        for w, mat in sys.incident[v]:
            if w in pos:
                j = pos[w]
                if j > i:
                    eshape = [1] * k
                    eshape[i] = q
                    eshape[j] = q
                    out = out * mat.reshape(eshape)
            elif w in sigma:
                factor = factor * mat[:, sigma[w]].reshape(shape)
            else:
                raise ValueError(f"neighbour {w} of free vertex {v} is neither free nor pinned")
        out = out * factor
    return out


def conditional_partition(sys: SpinSystem, sigma: Mapping[int, int], cap: int | None = None):
    """Sum of :func:`conditional_weight` over every completion of ``sigma``."""
    free = [v for v in range(sys.n) if v not in sigma]
    check_cap(sys.q ** len(free), cap)
    if not free:
        return sys.one()
    return conditional_weight_tensor(sys, free, sigma).sum()


def partition_function(sys: SpinSystem, cap: int | None = None):
    return conditional_partition(sys, {}, cap)


def is_permissive(sys: SpinSystem, cap: int | None = None) -> bool:
    """Check that every partial configuration has a positive conditional partition.

    Exhaustive over all ``Lambda`` and ``sigma``; only the zero pattern of the
    weights matters, so the check runs on boolean supports.
    """
    n, q = sys.n, sys.q
    check_cap((2 * q) ** n, cap)
    b_ok = np.array([[x > 0 for x in row] for row in sys.b], dtype=bool)
    mats_ok = [np.array([[x > 0 for x in row] for row in mat], dtype=bool) for mat in sys.edge_matrices]
    edges = sys.graph.edges
    for mask in range(1 << n):
        pinned = [v for v in range(n) if mask >> v & 1]
        free = [v for v in range(n) if not mask >> v & 1]
        pos = {v: i for i, v in enumerate(free)}
        for sig in itertools.product(range(q), repeat=len(pinned)):
            sigma = dict(zip(pinned, sig))
            if not _support_nonempty(q, free, pos, sigma, b_ok, mats_ok, edges):
                return False
    return True


def _support_nonempty(q, free, pos, sigma, b_ok, mats_ok, edges) -> bool:
    k = len(free)
    if k == 0:
        return True
    ok = np.ones((q,) * k, dtype=bool)
    for v, i in pos.items():
        shape = [1] * k
        shape[i] = q
        ok = ok & b_ok[v].reshape(shape)
    for idx, (u, v) in enumerate(edges):
        mat = mats_ok[idx]
        if u in pos and v in pos:
            shape = [1] * k
            shape[pos[u]] = q
            shape[pos[v]] = q
            m = mat if pos[u] < pos[v] else mat.T
            ok = ok & m.reshape(shape)
        elif u in pos:
            shape = [1] * k
            shape[pos[u]] = q
            ok = ok & mat[:, sigma[v]].reshape(shape)
        elif v in pos:
            shape = [1] * k
            shape[pos[v]] = q
            ok = ok & mat[sigma[u], :].reshape(shape)
    return bool(ok.any())


def admissible_spin(sys: SpinSystem, v: int, assigned: Mapping[int, int] | Sequence[int], neighbors=None):
    """Lowest spin at ``v`` compatible with ``b[v]`` and the assigned neighbours.

    ``neighbors`` restricts which neighbours are consulted; by default every
    neighbour present in ``assigned``. Returns ``None`` when no spin qualifies.
    """
    consult = []
    partial = isinstance(assigned, Mapping)
    for w, mat in sys.incident[v]:
        if neighbors is not None and w not in neighbors:
            continue
        if not partial or w in assigned:
            consult.append((mat, assigned[w]))
    for a in range(sys.q):
        if sys.b[v, a] > 0 and all(mat[a, s] > 0 for mat, s in consult):
            return a
    return None


def greedy_feasible(sys: SpinSystem) -> list:
    """Greedy feasible configuration: ascending vertices, lowest admissible spin."""
    sigma = {}
    for v in range(sys.n):
        a = admissible_spin(sys, v, sigma)
        if a is None:
            raise InfeasibleGreedyStep(v)
        sigma[v] = a
    return [sigma[v] for v in range(sys.n)]
