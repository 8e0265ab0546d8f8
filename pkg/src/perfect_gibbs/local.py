"""Exact local inference: marginals, block sampling and filter bounds.

Everything here works on a *local problem*: a set of free vertices whose
outside neighbours are either pinned to known spins or are *slots* whose spins
vary over a batch of boundary assignments. Conditional independence makes this
exact: once the outside neighbours of a region are fixed, the rest of the
graph no longer matters.

Computation is exact variable elimination over the free region, vectorised
over the slot batch. Float instances run in ``float64``; rational instances
run on object arrays of :class:`~fractions.Fraction` with no rescaling.
"""

import string
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import EnumerationCapExceeded, ZeroConditionalPartition, ZeroPartition
from .graph import boundary, connected_component, induced_subgraph, sphere
from .spin import PartialConfiguration, SpinSystem, check_cap, conditional_weight_tensor

_LETTERS = string.ascii_letters.replace("Z", "")
_BATCH = "Z"
_CHUNK = 1 << 15


@dataclass(frozen=True)
class DiscreteDistribution:
    """Explicit probability vector over an ordered list of distinct outcomes."""

    outcomes: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.outcomes) != len(self.probs):
            raise ValueError("outcomes and probs differ in length")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise ValueError("outcomes must be distinct")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be nonnegative")
        total = sum(self.probs)
        exact = all(isinstance(p, (Fraction, int)) for p in self.probs)
        if exact and total != 1 or not exact and abs(float(total) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")

    def __len__(self):
        return len(self.outcomes)

    def prob(self, outcome):
        try:
            return self.probs[self.outcomes.index(outcome)]
        except ValueError:
            return 0

    def as_dict(self) -> dict:
        return dict(zip(self.outcomes, self.probs))

    def as_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    @classmethod
    def from_weights(cls, outcomes, weights, drop_zero=False) -> "DiscreteDistribution":
        total = sum(weights)
        if not total > 0:
            raise ZeroPartition("all weights are zero")
        exact = isinstance(total, Fraction)
        pairs = [(o, w / total if exact else float(w / total))
                 for o, w in zip(outcomes, weights) if not (drop_zero and w == 0)]
        return cls(tuple(o for o, _ in pairs), tuple(p for _, p in pairs))


# ---------------------------------------------------------------------------
# local problems and variable elimination


class LocalProblem:
    """Free vertices with pinned neighbours and optional slot neighbours.

    Args:
        sys: the spin system.
        free: the free vertices (the block being summed over).
        pinned: spins of outside neighbours held fixed.
        slots: outside neighbours whose spins are supplied per batch row.

    Every outside neighbour of ``free`` must be pinned or a slot. Pinned
    entries that are not neighbours are ignored.
    """

    def __init__(self, sys: SpinSystem, free: Sequence[int], pinned: Mapping[int, int], slots: Sequence[int] = ()):
        self.sys = sys
        self.free = tuple(free)
        self.slots = tuple(slots)
        self.index = {v: i for i, v in enumerate(self.free)}
        slot_pos = {w: s for s, w in enumerate(self.slots)}
        q = sys.q
        unary = []
        attach = [[] for _ in self.free]
        pairs = []
        for i, v in enumerate(self.free):
            vec = sys.b[v]
            for w, mat in sys.incident[v]:
                j = self.index.get(w)
                if j is not None:
                    if j > i:
                        pairs.append((i, j, mat))
                elif w in slot_pos:
                    attach[i].append((slot_pos[w], mat))
                elif w in pinned:
                    vec = vec * mat[:, pinned[w]]
                else:
                    raise ValueError(f"neighbour {w} of free vertex {v} is neither pinned nor a slot")
            unary.append(np.asarray(vec, dtype=object if sys.rational else np.float64).reshape(q))
        self.unary = unary
        self.attach = attach
        self.pairs = pairs
        self._order_cache = {}

    # -- factor construction -------------------------------------------------

    def _unary_batch(self, sigma: np.ndarray | None):
        """Per-free-vertex ``(K, q)`` unary tables for a slot batch."""
        if sigma is None:
            return [u[None, :] for u in self.unary]
        out = []
        for i, vec in enumerate(self.unary):
            t = np.broadcast_to(vec, (sigma.shape[0], vec.shape[0]))
            for s, mat in self.attach[i]:
                t = t * mat[:, sigma[:, s]].T
            out.append(t)
        return out

    def _factors(self, sigma):
        facs = [((i,), t) for i, t in enumerate(self._unary_batch(sigma))]
        facs += [((i, j), mat[None, :, :]) for i, j, mat in self.pairs]
        return facs

    def elimination_order(self, keep: Sequence[int] = (), with_slots: bool = False) -> list:
        """Greedy min-degree order over free indices, excluding ``keep``.

        With ``with_slots`` the slot variables (indices after the free ones)
        take part in the interaction graph but are never eliminated.
        """
        key = (tuple(keep), with_slots)
        if key in self._order_cache:
            return self._order_cache[key]
        nf = len(self.free)
        nbrs = {i: set() for i in range(nf)}
        for i, j, _ in self.pairs:
            nbrs[i].add(j)
            nbrs[j].add(i)
        if with_slots:
            for i, att in enumerate(self.attach):
                for s, _ in att:
                    nbrs[i].add(nf + s)
                    nbrs.setdefault(nf + s, set()).add(i)
        remaining = set(range(nf)) - set(keep)
        order = []
        while remaining:
            v = min(remaining, key=lambda i: (len(nbrs[i]), i))
            order.append(v)
            remaining.discard(v)
            ns = nbrs.pop(v)
            for a in ns:
                nbrs[a].discard(v)
                nbrs[a].update(ns - {a})
        self._order_cache[key] = order
        return order

    def _eliminate(self, factors, order, record=False, limit=1 << 26):
        """Sum variables out in ``order``; optionally keep the pre-sum products."""
        q = self.sys.q
        rational = self.sys.rational
        tables = []
        for v in order:
            touching = [f for f in factors if v in f[0]]
            factors = [f for f in factors if v not in f[0]]
            scope = sorted(set().union(*(f[0] for f in touching)))
            if q ** len(scope) > limit:
                raise EnumerationCapExceeded(q ** len(scope), limit)
            subs = ",".join(_BATCH + "".join(_LETTERS[x] for x in f[0]) for f in touching)
            out = _BATCH + "".join(_LETTERS[x] for x in scope)
            if record:
                prod = np.einsum(subs + "->" + out, *(f[1] for f in touching))
                tables.append((v, tuple(scope), prod))
                msg = prod.sum(axis=1 + scope.index(v))
            else:
                out = out.replace(_LETTERS[v], "")
                msg = np.einsum(subs + "->" + out, *(f[1] for f in touching))
            if not rational and msg.ndim > 1:
                # rescale per batch row against under/overflow; ratios unchanged
                peak = msg.reshape(msg.shape[0], -1).max(axis=1)
                peak[peak == 0] = 1.0
                msg = msg / peak.reshape((-1,) + (1,) * (msg.ndim - 1))
            factors.append((tuple(x for x in scope if x != v), msg))
        return factors, tables

    # -- queries -------------------------------------------------------------

    def target_weights(self, target: int, sigma: np.ndarray | None = None) -> np.ndarray:
        """Unnormalised ``(K, q)`` weights of the target's spin."""
        t = self.index[target]
        factors, _ = self._eliminate(self._factors(sigma), self.elimination_order((t,)))
        out = None
        for scope, arr in factors:
            if scope:
                out = arr if out is None else out * arr
            else:
                out = arr[:, None] if out is None else out * arr[:, None]
        return out

    def slot_tables(self, target: int):
        """Marginal weights of ``target`` as a product of small slot tables.

        Every free vertex except ``target`` is summed out with the slot spins
        kept symbolic. The result is a list of ``(slot_positions, table)``
        pairs; ``table`` has one axis per listed slot followed by the target's
        spin axis, and the product of the gathered rows over all pairs gives the
        unnormalised weights of ``target`` for any slot assignment. Returns
        ``None`` when some intermediate table would be too large.
        """
        key = ("tables", target)
        if key in self._order_cache:
            return self._order_cache[key]
        nf = len(self.free)
        t = self.index[target]
        result = None
        if nf + len(self.slots) <= len(_LETTERS):
            order = self.elimination_order((t,), with_slots=True)
            facs = [((i,), u[None, :]) for i, u in enumerate(self.unary)]
            facs += [((i, j), mat[None, :, :]) for i, j, mat in self.pairs]
            facs += [((i, nf + s), mat[None, :, :]) for i, att in enumerate(self.attach) for s, mat in att]
            try:
                facs, _ = self._eliminate(facs, order, limit=1 << 20)
            except EnumerationCapExceeded:
                facs = None
            if facs is not None:
                result = []
                one = np.ones(self.sys.q, dtype=object if self.sys.rational else np.float64)
                for scope, arr in facs:
                    arr = arr[0]
                    if t not in scope:
                        arr = arr[..., None] * one
                        scope = scope + (t,)
                    else:
                        arr = np.moveaxis(arr, scope.index(t), -1)
                        scope = tuple(x for x in scope if x != t) + (t,)
                    result.append((tuple(x - nf for x in scope[:-1]), arr))
        self._order_cache[key] = result
        return result

    def marginal(self, target: int, sigma: np.ndarray | None = None) -> np.ndarray:
        """Normalised ``(K, q)`` marginal of ``target``; rows are batch entries."""
        w = self.target_weights(target, sigma)
        z = w.sum(axis=1)
        if np.any(z == 0):
            raise ZeroConditionalPartition(f"zero conditional partition around vertex {target}")
        return w / z[:, None]

    def sample(self, rng, sigma: np.ndarray | None = None) -> dict:
        """Draw the free block from its conditional law.

        ``sigma`` gives the slot spins as a ``(1, len(slots))`` array and is
        required when the problem has slots.

        Variables are eliminated in min-degree order and drawn back in reverse
        order, each from its exact conditional given the ones already drawn.
        Float instances consume a single uniform, rescaled at every level
        (inverting the cumulative distribution in that order); rational
        instances use exact integer draws.
        """
        order = self.elimination_order(())
        if self.slots and sigma is None:
            raise ValueError("slot spins are required to sample")
        factors, tables = self._eliminate(self._factors(sigma), order, record=True)
        z = self.sys.one()
        for _, arr in factors:
            z = z * arr[0]
        if not z > 0:
            raise ZeroConditionalPartition("zero conditional partition of block")
        assigned = {}
        u = None if self.sys.rational else float(rng.random())
        for v, scope, prod in reversed(tables):
            idx = tuple(assigned[x] if x != v else slice(None) for x in scope)
            weights = prod[0][idx]
            if self.sys.rational:
                assigned[v] = exact_index(weights, rng)
            else:
                assigned[v], u = _invert(weights, u)
        return {self.free[i]: assigned[i] for i in range(len(self.free))}


def _invert(weights: np.ndarray, u: float):
    """Cumulative inversion of one uniform; returns the index and the rescaled uniform."""
    cum = np.cumsum(weights)
    total = cum[-1]
    if not total > 0:
        raise ZeroConditionalPartition("zero weight in block conditional")
    target = u * total
    k = int(np.searchsorted(cum, target, side="right"))
    k = min(k, len(cum) - 1)
    while weights[k] == 0:
        k -= 1
    lo = cum[k - 1] if k > 0 else 0.0
    rescaled = (target - lo) / weights[k]
    return k, min(max(rescaled, 0.0), np.nextafter(1.0, 0.0))


def uniform_below(n: int, rng) -> int:
    """Exact uniform integer in ``[0, n)`` for arbitrarily large ``n``."""
    if n <= 0:
        raise ValueError("n must be positive")
    if n <= 1 << 62:
        return int(rng.integers(n))
    nbytes = (n.bit_length() + 7) // 8
    while True:
        r = int.from_bytes(rng.bytes(nbytes), "big") >> (8 * nbytes - n.bit_length())
        if r < n:
            return r


def exact_index(weights, rng) -> int:
    """Draw index ``i`` with probability exactly ``w_i / sum(w)`` for rational weights."""
    fr = [Fraction(w) for w in weights]
    den = 1
    for f in fr:
        den = den * f.denominator // _gcd(den, f.denominator)
    ints = [f.numerator * (den // f.denominator) for f in fr]
    total = sum(ints)
    if total <= 0:
        raise ZeroConditionalPartition("zero weight in exact draw")
    r = uniform_below(total, rng)
    acc = 0
    for i, w in enumerate(ints):
        acc += w
        if r < acc:
            return i
    raise AssertionError("unreachable")


def exact_bernoulli(p: Fraction, rng) -> bool:
    p = Fraction(p)
    if p >= 1:
        return True
    if p <= 0:
        return False
    return uniform_below(p.denominator, rng) < p.numerator


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


# ---------------------------------------------------------------------------
# public operations


def restricted_system(sys: SpinSystem, B: Sequence[int]):
    """Instance induced on ``B`` plus its vertex boundary.

    Returns ``(sub, index)`` where ``index[i]`` is the original vertex of
    ``sub``'s vertex ``i``.
    """
    if not B:
        raise ValueError("B must be nonempty")
    region = sorted(set(B) | set(boundary(sys.graph, B)))
    sub, index = induced_subgraph(sys.graph, region)
    b = [sys.b[v] for v in index]
    mats = [sys.edge_matrix(index[u], index[v]) for u, v in sub.edges]
    return SpinSystem(sub, sys.q, b, mats, rational=sys.rational), index


def marginal(sys: SpinSystem, v: int, sigma: Mapping[int, int], cap: int | None = None) -> DiscreteDistribution:
    """Marginal law of ``v`` under the Gibbs distribution conditioned on ``sigma``.

    Only the connected component of ``v`` among unpinned vertices is summed;
    pinned vertices separate it from everything else.
    """
    if v in sigma:
        raise ValueError(f"vertex {v} is pinned by sigma")
    free_set = set(range(sys.n)) - set(sigma)
    comp = connected_component(sys.graph, v, free_set)
    check_cap(sys.q ** len(comp), cap)
    prob = LocalProblem(sys, comp, sigma).marginal(v)[0]
    return DiscreteDistribution(tuple(range(sys.q)), tuple(prob.tolist()))


def conditional_block_distribution(sys: SpinSystem, B: Sequence[int], outside: Mapping[int, int],
                                   cap: int | None = None) -> DiscreteDistribution:
    """Law of the spins on ``B`` given the spins on its boundary, by enumeration.

    Outcomes are spin tuples in lexicographic order over ascending ``B``;
    zero-weight tuples are dropped.
    """
    B = tuple(sorted(B))
    check_cap(sys.q ** len(B), cap)
    pinned = {w: outside[w] for w in boundary(sys.graph, B)}
    table = conditional_weight_tensor(sys, B, pinned).ravel()
    outcomes = list(np.ndindex(*(sys.q,) * len(B)))
    try:
        return DiscreteDistribution.from_weights(outcomes, list(table), drop_zero=True)
    except ZeroPartition:
        raise ZeroConditionalPartition("zero conditional partition of block") from None


def sample_block(sys: SpinSystem, B: Sequence[int], outside: Mapping[int, int], rng,
                 cap: int | None = None) -> PartialConfiguration:
    """Redraw the spins on ``B`` from their conditional law given ``outside``.

    ``outside`` must cover the boundary of ``B``; extra entries (for example a
    full configuration given as a mapping) are ignored.
    """
    B = tuple(sorted(B))
    check_cap(sys.q ** len(B), cap)
    pinned = {w: outside[w] for w in boundary(sys.graph, B)}
    return PartialConfiguration(LocalProblem(sys, B, pinned).sample(rng))


def block_of(sys: SpinSystem, R, u: int, ell: int) -> tuple:
    """``(ball(u, ell) minus R) + {u}``, sorted."""
    return tuple(sorted({w for w in sys.graph.ball(u, ell) if w not in R} | {u}))


@dataclass
class FilterContext:
    """Everything one filter evaluation needs at vertex ``u``.

    ``block`` is the resampled block, ``fixed`` the boundary vertices inside
    ``R`` (pinned to ``X``) and ``free_boundary`` the boundary vertices outside
    ``R`` whose spins the minimum ranges over.
    """

    sys: SpinSystem
    u: int
    x: int
    block: tuple
    fixed: tuple
    free_boundary: tuple
    X: Sequence[int]
    problem: LocalProblem = field(repr=False, default=None)

    @classmethod
    def build(cls, sys: SpinSystem, R, u: int, X: Sequence[int], ell: int, cap: int | None = None) -> "FilterContext":
        block = block_of(sys, R, u, ell)
        check_cap(sys.q ** len(block), cap)
        dB = boundary(sys.graph, block)
        fixed = tuple(w for w in dB if w in R)
        free_b = tuple(w for w in dB if w not in R)
        pinned = {w: X[w] for w in fixed}
        problem = LocalProblem(sys, block, pinned, free_b)
        return cls(sys, u, X[u], block, fixed, free_b, X, problem)

    def current_sigma(self) -> np.ndarray:
        return np.array([[self.X[w] for w in self.free_boundary]], dtype=np.int64).reshape(1, len(self.free_boundary))

    def weights(self, sigma: np.ndarray) -> np.ndarray:
        """Unnormalised ``(K, q)`` weights of ``u``'s spin per boundary row."""
        tables = self.problem.slot_tables(self.u)
        if tables is None:
            return self.problem.target_weights(self.u, sigma)
        out = None
        for spos, arr in tables:
            g = arr[tuple(sigma[:, s] for s in spos)] if spos else arr[None, :]
            out = g if out is None else out * g
        if out.shape[0] != sigma.shape[0]:
            out = np.repeat(out, sigma.shape[0], axis=0)
        return out

    def marginals(self, sigma: np.ndarray) -> np.ndarray:
        """Probability of ``X_u`` for each boundary assignment row."""
        w = self.weights(sigma)
        z = w.sum(axis=1)
        if np.any(z == 0):
            raise ZeroConditionalPartition(f"zero conditional partition around vertex {self.u}")
        return w[:, self.x] / z

    def lower_bound(self) -> float:
        """A cheap lower bound on the minimum (float mode).

        Writes the marginal as ``1 / (1 + sum_y W_y / W_x)`` and bounds every
        ratio ``W_y / W_x`` by maximising each slot table's ratio separately,
        as if every table and every ``y`` could pick its own boundary.
        """
        tables = self.problem.slot_tables(self.u)
        if tables is None:
            return 0.0
        x = self.x
        total = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.ones(self.sys.q)
            for spos, arr in tables:
                a = np.asarray(arr, dtype=np.float64).reshape(-1, self.sys.q)
                den = a[:, x:x + 1]
                if np.any(den == 0):
                    return 0.0
                ratios = ratios * (a / den).max(axis=0)
            ratios[x] = 0.0
            total = ratios.sum()
        return float(1.0 / (1.0 + total))

    def current(self):
        """Marginal of ``X_u`` given the actual boundary ``X_dB``."""
        return self.marginals(self.current_sigma())[0]

    def distinguished_spins(self) -> set:
        return {self.x} | {self.X[w] for w in self.fixed}

    def minimum(self, cap: int | None = None):
        """Exact minimum of the marginal of ``X_u`` over free-boundary assignments.

        Returns ``(value, argmin_row)``. Assignments equivalent under a spin
        permutation that fixes the instance and the distinguished spins give
        equal marginals, so only one representative per orbit is evaluated.
        """
        q = self.sys.q
        k = len(self.free_boundary)
        if k == 0:
            sig = self.current_sigma()
            return self.marginals(sig)[0], sig[0]
        classes = spin_classes(self.sys)
        best = None
        best_row = None
        for chunk in canonical_assignments(k, q, classes, self.distinguished_spins(), cap=cap):
            vals = self.marginals(chunk)
            i = int(np.argmin(vals)) if not self.sys.rational else min(range(len(vals)), key=lambda j: vals[j])
            if best is None or vals[i] < best:
                best, best_row = vals[i], chunk[i]
        return best, best_row


def mu_min(sys: SpinSystem, R, u: int, X: Sequence[int], ell: int, cap: int | None = None):
    """Minimum of the marginal of ``X_u`` over boundary spins outside ``R``.

    The block is ``(ball(u, ell) minus R) + {u}``; boundary vertices in ``R``
    keep their spins from ``X`` and the remaining boundary vertices range over
    all ``q`` spins.
    """
    R = set(R)
    if u not in R:
        raise ValueError("u must belong to R")
    ctx = FilterContext.build(sys, R, u, X, ell, cap)
    return ctx.minimum(cap)[0]


def default_slack(m: int) -> float:
    return 1.0 - 1.0 / (5 * m) if m > 0 else 1.0


def mu_low(sys: SpinSystem, R, u: int, X: Sequence[int], ell: int,
           slack: Callable[[int], float] = default_slack, reference: int = 0, cap: int | None = None):
    """Cheap filter numerator: one reference boundary times a spatial-mixing slack.

    Free boundary vertices are all set to ``reference``; the marginal there is
    multiplied by ``slack(|sphere(u, ell + 1)|)`` (by default
    ``1 - 1/(5m)``). This lower-bounds the true marginal only on instances
    whose correlations decay fast enough at distance ``ell + 1``.
    """
    R = set(R)
    ctx = FilterContext.build(sys, R, u, X, ell, cap)
    return _mu_low_from_context(ctx, ell, slack, reference)


def _mu_low_from_context(ctx: FilterContext, ell, slack, reference):
    sys = ctx.sys
    ref = np.full((1, len(ctx.free_boundary)), reference, dtype=np.int64)
    m = len(sphere(sys.graph, ctx.u, ell + 1))
    factor = slack(m)
    if sys.rational:
        factor = Fraction(factor) if not isinstance(factor, Fraction) else factor
        if m > 0 and slack is default_slack:
            factor = 1 - Fraction(1, 5 * m)
    return factor * ctx.marginals(ref)[0]


def brute_force_distribution(sys: SpinSystem, cap: int | None = None) -> DiscreteDistribution:
    """Exact Gibbs distribution by enumerating all ``q**n`` configurations.

    Outcomes are configuration tuples in lexicographic order (vertex 0 most
    significant); zero-weight configurations are omitted.
    """
    check_cap(sys.q ** sys.n, cap)
    table = conditional_weight_tensor(sys, list(range(sys.n)), {}).ravel()
    outcomes = list(np.ndindex(*(sys.q,) * sys.n))
    return DiscreteDistribution.from_weights(outcomes, list(table), drop_zero=True)


def brute_force_marginal(sys: SpinSystem, v: int, sigma: Mapping[int, int], cap: int | None = None) -> DiscreteDistribution:
    """Marginal of ``v`` given ``sigma`` by summing over the whole free region.

    Independent of :class:`LocalProblem`; used as the oracle for
    :func:`marginal`.
    """
    free = [w for w in range(sys.n) if w not in sigma]
    check_cap(sys.q ** len(free), cap)
    table = conditional_weight_tensor(sys, free, sigma)
    axis = free.index(v)
    other = tuple(i for i in range(len(free)) if i != axis)
    w = table.sum(axis=other) if other else table
    total = w.sum()
    if not total > 0:
        raise ZeroConditionalPartition("zero conditional partition")
    return DiscreteDistribution(tuple(range(sys.q)), tuple((w / total).tolist()))


# ---------------------------------------------------------------------------
# spin symmetry


def spin_classes(sys: SpinSystem) -> list:
    """Partition of spins into classes of mutually interchangeable spins.

    Spins ``a`` and ``c`` are interchangeable when swapping them leaves every
    vertex vector and every edge matrix unchanged. Cached on the instance.
    """
    cached = getattr(sys, "_spin_classes", None)
    if cached is not None:
        return cached
    q = sys.q
    if sys.rational:
        b = np.array([[Fraction(x) for x in row] for row in sys.b], dtype=object)
        mats = list({tuple(map(tuple, m)): m for m in sys.edge_matrices}.values())
    else:
        b = sys.b
        mats = np.unique(sys.edge_matrices.reshape(len(sys.edge_matrices), -1), axis=0).reshape(-1, q, q) \
            if len(sys.edge_matrices) else []
    parent = list(range(q))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(q):
        for c in range(a + 1, q):
            if find(a) == find(c):
                continue
            perm = list(range(q))
            perm[a], perm[c] = c, a
            if any(b[v, a] != b[v, c] for v in range(sys.n)):
                continue
            if all(np.array_equal(np.asarray(m)[np.ix_(perm, perm)], np.asarray(m)) for m in mats):
                parent[find(c)] = find(a)
    groups = {}
    for a in range(q):
        groups.setdefault(find(a), []).append(a)
    out = sorted(groups.values())
    sys._spin_classes = out
    return out


def canonical_assignments(k: int, q: int, classes, distinguished, chunk: int = _CHUNK, cap: int | None = None):
    """Yield ``(N, k)`` arrays of orbit representatives of ``[q]^k``.

    The orbits are those of the group permuting spins within each class while
    fixing ``distinguished`` spins. A representative introduces the members of
    each class in increasing order; rows are in lexicographic order. The
    enumeration cap applies to the number of representatives.
    """
    pools = [[a for a in cl if a not in distinguished] for cl in classes]
    # a spin alone in its pool has a trivial orbit and behaves like a fixed spin
    fixed = sorted([a for cl in classes for a in cl if a in distinguished]
                   + [p[0] for p in pools if len(p) == 1])
    pools = [p for p in pools if len(p) > 1]
    rows = np.zeros((1, 0), dtype=np.int64)
    used = np.zeros((1, len(pools)), dtype=np.int64)
    # grow prefixes level by level; yield in chunks once the last level is reached
    for level in range(k):
        new_rows = []
        new_used = []
        options = []
        for a in fixed:
            options.append((a, None, None))
        for pi, pool in enumerate(pools):
            for r, a in enumerate(pool):
                options.append((a, pi, r))
        options.sort(key=lambda o: o[0])
        for a, pi, r in options:
            if pi is None:
                mask = slice(None)
                nu = used
            else:
                sel = used[:, pi] >= r
                if not sel.any():
                    continue
                mask = sel
                nu = used[sel].copy()
                grow = nu[:, pi] == r
                nu[grow, pi] += 1
            base = rows[mask]
            new_rows.append(np.hstack([base, np.full((base.shape[0], 1), a, dtype=np.int64)]))
            new_used.append(nu)
        rows = np.vstack(new_rows)
        used = np.vstack(new_used)
        check_cap(rows.shape[0], cap)
        order = np.lexsort(rows.T[::-1])
        rows = rows[order]
        used = used[order]
    for start in range(0, rows.shape[0], chunk):
        yield rows[start:start + chunk]


# ---------------------------------------------------------------------------
# cached evaluation for the repair loop

# blocks with at most this many joint states are sampled by explicit
# lexicographic enumeration; larger ones by sequential conditionals
ENUMERATE_BLOCK_STATES = 1 << 12


class _Structure:
    """Block geometry for one ``u`` and one pattern of ``R`` near ``u``."""

    __slots__ = ("u", "block", "fixed", "free_boundary", "locals")

    def __init__(self, u, block, fixed, free_boundary):
        self.u = u
        self.block = block
        self.fixed = fixed
        self.free_boundary = free_boundary
        self.locals = {}


class _Local:
    """Cached quantities for one structure and one set of pinned spins."""

    __slots__ = ("ctx", "pinned", "rows", "minima", "lower")

    def __init__(self, ctx, pinned):
        self.ctx = ctx
        self.pinned = pinned
        self.rows = {}
        self.minima = {}
        self.lower = {}


class _Row:
    """Quantities for one full boundary: marginal of ``u`` and block sampler."""

    __slots__ = ("marginal", "cum", "weights")

    def __init__(self, marginal):
        self.marginal = marginal
        self.cum = None
        self.weights = None


class LocalEngine:
    """Memoised filter and block computations for one instance and radius.

    Every quantity a repair step needs depends only on ``u``, on which
    vertices near ``u`` lie in ``R`` and on the spins near ``u``, so results
    are cached under those keys. Caches are cleared wholesale when they grow
    past ``max_entries``.
    """

    def __init__(self, sys: SpinSystem, ell: int, cap: int | None = None, max_entries: int = 1 << 15):
        self.sys = sys
        self.ell = ell
        self.cap = cap
        self.max_entries = max_entries
        self._structures = {}
        self._entries = 0
        self._near = [tuple(sys.graph.ball(u, ell + 1)) for u in range(sys.n)] if sys.n <= 50_000 else None

    def _near_ball(self, u):
        return self._near[u] if self._near is not None else self.sys.graph.ball(u, self.ell + 1)

    def _bump(self):
        self._entries += 1
        if self._entries > self.max_entries:
            self._structures.clear()
            self._entries = 0

    def structure(self, in_R, u: int) -> _Structure:
        """``in_R`` supports ``in``; ``u`` must be in ``R``."""
        near = self._near_ball(u)
        key = (u, tuple(w for w in near if w in in_R))
        st = self._structures.get(key)
        if st is None:
            sys = self.sys
            block = tuple(sorted({w for w in sys.graph.ball(u, self.ell) if w not in in_R} | {u}))
            check_cap(sys.q ** len(block), self.cap)
            dB = boundary(sys.graph, block)
            fixed = tuple(w for w in dB if w in in_R)
            free_b = tuple(w for w in dB if w not in in_R)
            st = _Structure(u, block, fixed, free_b)
            self._structures[key] = st
            self._bump()
        return st

    def local(self, st: _Structure, X) -> _Local:
        xf = tuple(X[w] for w in st.fixed)
        loc = st.locals.get(xf)
        if loc is None:
            pinned = dict(zip(st.fixed, xf))
            problem = LocalProblem(self.sys, st.block, pinned, st.free_boundary)
            ctx = FilterContext(self.sys, st.u, None, st.block, st.fixed, st.free_boundary, pinned, problem)
            loc = _Local(ctx, pinned)
            st.locals[xf] = loc
            self._bump()
        return loc

    def row(self, loc: _Local, xs: tuple) -> _Row:
        r = loc.rows.get(xs)
        if r is None:
            sigma = np.array([xs], dtype=np.int64).reshape(1, len(xs))
            w = loc.ctx.weights(sigma)[0]
            z = w.sum()
            if not z > 0:
                raise ZeroConditionalPartition(f"zero conditional partition around vertex {loc.ctx.u}")
            r = _Row(w / z)
            loc.rows[xs] = r
            self._bump()
        return r

    def minimum(self, loc: _Local, x: int):
        m = loc.minima.get(x)
        if m is None:
            ctx = loc.ctx
            ctx.x = x
            m = ctx.minimum(self.cap)[0]
            loc.minima[x] = m
        return m

    def lower_bound(self, loc: _Local, x: int) -> float:
        lb = loc.lower.get(x)
        if lb is None:
            if x in loc.minima:
                lb = float(loc.minima[x])
            else:
                loc.ctx.x = x
                lb = loc.ctx.lower_bound()
            loc.lower[x] = lb
        return lb

    def sample(self, st: _Structure, loc: _Local, xs: tuple, r: _Row, rng) -> tuple:
        """Spins for ``st.block`` (ascending) drawn from the block conditional.

        Small blocks: enumerate all joint states in lexicographic order and
        invert one uniform over the cumulative weights. Large blocks: draw
        vertex by vertex along the elimination order.
        """
        sys = self.sys
        nb = len(st.block)
        if sys.q ** nb <= ENUMERATE_BLOCK_STATES:
            if r.weights is None:
                pinned = dict(loc.pinned)
                pinned.update(zip(st.free_boundary, xs))
                t = conditional_weight_tensor(sys, st.block, pinned).ravel()
                r.weights = t
                if not sys.rational:
                    r.cum = np.cumsum(t)
                    if not r.cum[-1] > 0:
                        raise ZeroConditionalPartition("zero conditional partition of block")
            if sys.rational:
                k = exact_index(r.weights, rng)
            else:
                k, _ = _invert_cum(r.weights, r.cum, float(rng.random()))
            return np.unravel_index(k, (sys.q,) * nb)
        sigma = np.array([xs], dtype=np.int64).reshape(1, len(xs))
        drawn = loc.ctx.problem.sample(rng, sigma)
        return tuple(drawn[v] for v in st.block)


def _invert_cum(weights, cum, u: float):
    total = cum[-1]
    k = int(np.searchsorted(cum, u * total, side="right"))
    k = min(k, len(cum) - 1)
    while weights[k] == 0:
        k -= 1
    return k, None
