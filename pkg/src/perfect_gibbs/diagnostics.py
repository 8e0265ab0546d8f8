"""Statistical checks, brute-force probes of mixing conditions, benchmarks."""

import csv
import io
import itertools
import math
import time
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .errors import EnumerationCapExceeded, OutcomeMismatch, TooFewSamples, ZeroConditionalPartition
from .graph import boundary, sphere
from .local import DiscreteDistribution, FilterContext, brute_force_distribution
from .sampler import FilterMode, SamplerConfig, init, step
from .spin import SpinSystem, check_cap, enumeration_cap

INFINITE = math.inf


# ---------------------------------------------------------------------------
# distances and goodness of fit


def _outcome_kind(o):
    return ("tuple", len(o)) if isinstance(o, tuple) else ("scalar",)


def tv_distance(p: DiscreteDistribution, r: DiscreteDistribution) -> float:
    """Total variation distance ``(1/2) sum |p_i - r_i|``.

    Outcomes missing from one side count as probability zero there. Raises
    :class:`OutcomeMismatch` when the two outcome spaces are of different
    shapes (for example configurations of different lengths).
    """
    kinds = {_outcome_kind(o) for o in p.outcomes} | {_outcome_kind(o) for o in r.outcomes}
    if len(kinds) > 1:
        raise OutcomeMismatch(f"outcome spaces differ: {sorted(kinds)}")
    pd, rd = p.as_dict(), r.as_dict()
    keys = set(pd) | set(rd)
    return 0.5 * sum(abs(float(pd.get(k, 0)) - float(rd.get(k, 0))) for k in keys)


def empirical(samples: Iterable) -> DiscreteDistribution:
    """Empirical distribution of hashable samples (outcomes sorted)."""
    counts = Counter(tuple(s) if isinstance(s, list) else s for s in samples)
    n = sum(counts.values())
    if n == 0:
        raise TooFewSamples("no samples")
    outs = tuple(sorted(counts))
    return DiscreteDistribution(outs, tuple(counts[o] / n for o in outs))


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    bins: int
    pooled: int
    unexpected: int

    def passes(self, alpha: float = 1e-3) -> bool:
        return self.p_value > alpha


def chi_square_gof(counts: Mapping, expected: DiscreteDistribution, min_expected: float = 5.0) -> ChiSquareResult:
    """Pearson goodness-of-fit test of tallies against an exact law.

    Outcomes whose expected count is below ``min_expected`` are pooled into
    one bin; if that bin is still too small it absorbs the smallest remaining
    bins. Any count on an outcome of probability zero makes the statistic
    infinite and the p-value zero.

    Raises:
        TooFewSamples: no samples, or fewer than two bins after pooling.
    """
    counts = {(tuple(k) if isinstance(k, list) else k): v for k, v in counts.items()}
    total = sum(counts.values())
    if total <= 0:
        raise TooFewSamples("no samples")
    probs = {o: float(p) for o, p in zip(expected.outcomes, expected.probs)}
    unexpected = sum(c for o, c in counts.items() if probs.get(o, 0.0) == 0.0)
    if unexpected:
        return ChiSquareResult(INFINITE, max(len(probs) - 1, 1), 0.0, len(probs), 0, unexpected)
    exp = np.array([total * p for p in probs.values() if p > 0])
    obs = np.array([counts.get(o, 0) for o, p in probs.items() if p > 0], dtype=np.float64)
    order = np.argsort(exp, kind="stable")
    exp, obs = exp[order], obs[order]
    small = exp < min_expected
    pooled = int(small.sum())
    if pooled:
        pe, po = exp[small].sum(), obs[small].sum()
        exp, obs = exp[~small], obs[~small]
        while pe < min_expected and len(exp):
            pe, po = pe + exp[0], po + obs[0]
            exp, obs = exp[1:], obs[1:]
            pooled += 1
        exp = np.append(exp, pe)
        obs = np.append(obs, po)
    if len(exp) < 2:
        raise TooFewSamples(f"only {len(exp)} bin(s) after pooling; draw more samples")
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = len(exp) - 1
    return ChiSquareResult(stat, dof, float(sps.chi2.sf(stat, dof)), len(exp), pooled, 0)


# ---------------------------------------------------------------------------
# brute-force probes


def _marginal_tables(sys: SpinSystem, v: int, cap: int | None):
    """``Lambda`` (sorted tuple, excluding ``v``) -> ``(q**|Lambda|, q)`` marginals of ``v``.

    Rows are in lexicographic order of the spins on ``Lambda``. Rows with a
    zero conditional partition are NaN.
    """
    n, q = sys.n, sys.q
    others = [w for w in range(n) if w != v]
    check_cap((2 ** len(others)) * q ** n, cap)
    tables = {}
    for k in range(len(others) + 1):
        for lam in itertools.combinations(others, k):
            lam_set = set(lam)
            t = np.ones((q,) * n)
            for w in range(n):
                if w not in lam_set:
                    shape = [1] * n
                    shape[w] = q
                    t = t * np.asarray(sys.b[w], dtype=np.float64).reshape(shape)
            for idx, (a, c) in enumerate(sys.graph.edges):
                if a in lam_set and c in lam_set:
                    continue
                shape = [1] * n
                shape[a] = q
                shape[c] = q
                t = t * np.asarray(sys.edge_matrices[idx], dtype=np.float64).reshape(shape)
            free = [w for w in range(n) if w not in lam_set and w != v]
            t = t.sum(axis=tuple(free)) if free else t
            # remaining axes: lam (ascending) and v, in vertex order
            axes = sorted(list(lam) + [v])
            t = np.moveaxis(t, axes.index(v), -1).reshape(-1, q)
            z = t.sum(axis=1, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                tables[lam] = np.where(z > 0, t / np.where(z > 0, z, 1), np.nan)
    return tables


def _ratio(num, den):
    """Elementwise ``num / den`` with ``0/0 = 1`` and ``x/0 = inf`` for ``x > 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    r = np.where((den == 0) & (num == 0), 1.0, r)
    return np.where((den == 0) & (num > 0), np.inf, r)


@dataclass(frozen=True)
class SsmEntry:
    """Brute-force mixing bounds for one vertex and one distance.

    ``ratio_bound`` is the worst ``|mu^sigma(a) / mu^tau(a) - 1|`` over
    boundary pairs whose closest disagreement is at distance ``ell``;
    ``weak_bound`` is the worst ``1 - min_tau mu^{sigma+tau}(a) / mu^sigma(a)``
    over pinned sets at distance ``ell``. Both use ``0/0 = 1``; ``inf`` means
    some ratio had a zero denominator. ``threshold`` is ``1/(5 |S_ell(v)|)``.
    """

    v: int
    ell: int
    sphere_size: int
    ratio_bound: float
    weak_bound: float
    threshold: float

    @property
    def ratio_ok(self) -> bool:
        return self.ratio_bound <= self.threshold

    @property
    def weak_ok(self) -> bool:
        return self.weak_bound <= self.threshold


def ssm_ratio_probe(sys: SpinSystem, v: int, ell: int, cap: int | None = None) -> SsmEntry:
    """Exhaustive multiplicative spatial-mixing bounds at vertex ``v``.

    Enumerates every pinned set, every pair of pinnings and every spin, so
    only small instances are feasible.
    """
    if ell < 1:
        raise ValueError("ell must be at least 1")
    q = sys.q
    dist = sys.graph.distances_from(v)
    s_size = len(sphere(sys.graph, v, ell))
    threshold = 1.0 / (5 * s_size) if s_size else INFINITE
    tables = _marginal_tables(sys, v, cap)
    ratio_bound = 0.0
    weak_bound = 0.0
    for lam, table in tables.items():
        at = [i for i, w in enumerate(lam) if dist.get(w, math.inf) == ell]
        if not at:
            continue
        near = [i for i, w in enumerate(lam) if dist.get(w, math.inf) < ell]
        far = [i for i, w in enumerate(lam) if dist.get(w, math.inf) > ell]
        t = table.reshape((q,) * len(lam) + (q,))
        t = np.transpose(t, near + at + far + [len(lam)])
        t = t.reshape(q ** len(near), q ** len(at), q ** len(far), q)
        if np.isnan(t).any():
            raise ZeroConditionalPartition("instance is not permissive")
        hi = t.max(axis=2)
        lo = t.min(axis=2)
        n_at = q ** len(at)
        off = ~np.eye(n_at, dtype=bool)
        rmax = _ratio(hi[:, :, None, :], lo[:, None, :, :])[:, off, :]
        rmin = _ratio(lo[:, :, None, :], hi[:, None, :, :])[:, off, :]
        ratio_bound = max(ratio_bound, float(np.max(rmax - 1)), float(np.max(1 - rmin)))

        # weak form: every split of lam into A and B where B is at distance
        # >= ell from v and touches distance exactly ell
        ge = [i for i, w in enumerate(lam) if dist.get(w, math.inf) >= ell]
        full = table.reshape((q,) * len(lam) + (q,))
        for r in range(1, len(ge) + 1):
            for b_idx in itertools.combinations(ge, r):
                if not any(i in at for i in b_idx):
                    continue
                a_idx = [i for i in range(len(lam)) if i not in b_idx]
                tb = np.transpose(full, a_idx + list(b_idx) + [len(lam)])
                tb = tb.reshape(q ** len(a_idx), q ** len(b_idx), q)
                base = tables[tuple(lam[i] for i in a_idx)]
                weak = 1 - _ratio(tb.min(axis=1), base)
                weak_bound = max(weak_bound, float(np.max(weak)))
    return SsmEntry(v, ell, s_size, ratio_bound, weak_bound, threshold)


def ssm_report(sys: SpinSystem, ell: int, cap: int | None = None) -> list:
    return [ssm_ratio_probe(sys, v, ell, cap) for v in range(sys.n)]


def gamma_probe(sys: SpinSystem, ell: int, cap: int | None = None):
    """Smallest filter numerator over every reachable filter evaluation.

    Minimises the exact ``mu_min`` over all nonempty ``R``, all ``u`` in
    ``R`` and all feasible configurations ``X`` (only ``X`` on ``R`` matters).
    Returns ``0.0`` when some evaluation can reject with certainty.
    """
    support = brute_force_distribution(sys, cap).outcomes
    n = sys.n
    check_cap((2 ** n) * n * len(support), cap)
    best = None
    for mask in range(1, 1 << n):
        R = {w for w in range(n) if mask >> w & 1}
        for u in sorted(R):
            seen = set()
            for X in support:
                ctx = FilterContext.build(sys, R, u, X, ell, cap)
                key = (X[u],) + tuple(X[w] for w in ctx.fixed)
                if key in seen:
                    continue
                seen.add(key)
                val = float(ctx.minimum(cap)[0])
                if best is None or val < best:
                    best = val
                if best == 0.0:
                    return 0.0
    return best


def empirical_drift(sys: SpinSystem, ell: int, steps: int, seed: int = 0) -> float:
    """Mean per-step decrease of ``|R|`` over ``steps`` iterations (restarting as needed)."""
    rng = np.random.default_rng(seed)
    cfg = SamplerConfig(ell=ell, check_invariants=False)
    total = 0
    done = 0
    while done < steps:
        state = init(sys, cfg)
        while state.R and done < steps:
            before = len(state.R)
            step(sys, state, cfg, rng)
            total += before - len(state.R)
            done += 1
    return total / steps


# ---------------------------------------------------------------------------
# benchmarks


@dataclass(frozen=True)
class BenchRow:
    n: int
    trials: int
    mean_T: float
    sd_T: float
    mean_ms: float
    sd_ms: float
    T_over_n: float
    timed_out: bool = False

    @property
    def ms_per_vertex(self) -> float:
        return self.mean_ms / self.n


BENCH_HEADER = ("n", "trials", "mean_T", "sd_T", "mean_ms", "sd_ms", "T_over_n")


def grid_coloring_model(q: int = 9) -> Callable[[int], SpinSystem]:
    """Model descriptor: ``n`` (a perfect square) -> proper ``q``-coloring of the square grid."""
    from .instances import coloring_instance, grid_graph

    def build(n: int) -> SpinSystem:
        side = math.isqrt(n)
        if side * side != n:
            raise ValueError(f"grid size {n} is not a perfect square")
        return coloring_instance(grid_graph(side, side), q)

    return build


def _timed_trial(sys, cfg, seed, deadline):
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    state = init(sys, cfg)
    while state.R:
        step(sys, state, cfg, rng)
        if deadline is not None and state.stats.iterations % 32 == 0 and time.perf_counter() > deadline:
            return None
    return state.stats.iterations, (time.perf_counter() - start) * 1e3


def bench_scaling(model: Callable[[int], SpinSystem], sizes: Sequence[int], trials: int,
                  cfg: SamplerConfig | None = None, seed: int = 0, timeout_s: float | None = None,
                  total_timeout_s: float | None = None, progress: Callable | None = None) -> list:
    """Iteration counts and wall time per size.

    Trial ``i`` uses seed ``seed ^ i``. A size whose budget runs out keeps the
    trials completed so far and is marked ``timed_out``; the run continues with
    the next size unless the total budget is spent too.
    """
    cfg = cfg or SamplerConfig(check_invariants=False)
    rows = []
    t_all = time.perf_counter()
    for n in sizes:
        sys = model(n)
        start = time.perf_counter()
        deadlines = [d for d in (start + timeout_s if timeout_s else None,
                                 t_all + total_timeout_s if total_timeout_s else None) if d is not None]
        deadline = min(deadlines) if deadlines else None
        Ts, ms = [], []
        timed_out = False
        for i in range(trials):
            res = _timed_trial(sys, cfg, seed ^ i, deadline)
            if res is None:
                timed_out = True
                break
            Ts.append(res[0])
            ms.append(res[1])
            if progress:
                progress(n, i, res)
        k = len(Ts)
        rows.append(BenchRow(
            n=sys.n, trials=k,
            mean_T=float(np.mean(Ts)) if k else math.nan,
            sd_T=float(np.std(Ts, ddof=1)) if k > 1 else 0.0,
            mean_ms=float(np.mean(ms)) if k else math.nan,
            sd_ms=float(np.std(ms, ddof=1)) if k > 1 else 0.0,
            T_over_n=float(np.mean(Ts)) / sys.n if k else math.nan,
            timed_out=timed_out,
        ))
    return rows


def bench_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for r in rows:
        w.writerow([r.n, r.trials, f"{r.mean_T:.3f}", f"{r.sd_T:.3f}", f"{r.mean_ms:.3f}",
                    f"{r.sd_ms:.3f}", f"{r.T_over_n:.4f}"])
    return buf.getvalue()


def time_ratio(rows: Sequence[BenchRow]) -> float:
    """Max over sizes of time per vertex divided by the min (``inf`` if any size failed)."""
    per = [r.mean_ms / r.n for r in rows]
    if not per or any(r.trials == 0 or r.timed_out for r in rows):
        return INFINITE
    return max(per) / min(per)
