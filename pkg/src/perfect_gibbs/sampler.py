"""Perfect samplers driven by a Bayes filter.

The general sampler keeps a configuration ``X`` and a set ``R`` of vertices
whose spins are not yet known to be correct. Each step picks ``u`` uniformly
from ``R``, forms the block ``B = (ball(u, ell) minus R) + {u}`` and accepts
with probability ``mu_min / mu_u(X_u | X_dB)``. On acceptance ``X_B`` is
redrawn from its conditional law and ``u`` leaves ``R``; on rejection the
boundary of ``B`` joins ``R``. When ``R`` empties, ``X`` is an exact sample.

``ell = 0`` is the single-site sampler, valid for soft instances only.
"""

import enum
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from sortedcontainers import SortedList

from .errors import FilterProbabilityExceeded, HardConstraintRejected, Interrupted
from .graph import sphere
from .local import (FilterContext, LocalEngine, canonical_assignments, default_slack, exact_bernoulli,
                    spin_classes)
from .spin import NumericMode, SpinSystem, greedy_feasible

# relative slack tolerated between a float lower bound and the current marginal
_FLOAT_SLACK = 1e-9


class FilterMode(enum.Enum):
    MUMIN = "mumin"
    MULOW = "mulow"

    @classmethod
    def parse(cls, value) -> "FilterMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass
class SamplerConfig:
    """Parameters of a sampler run.

    Attributes:
        ell: block radius. ``0`` is allowed only for soft instances.
        filter_mode: ``MUMIN`` (exact minimum) or ``MULOW`` (reference
            boundary times a spatial-mixing slack; only valid when the instance
            mixes fast enough at distance ``ell + 1``).
        max_iterations: abort with :class:`Interrupted` after this many steps.
        seed: seed for :func:`numpy.random.default_rng` when no generator is given.
        numeric_mode: convert the instance to this mode before running;
            ``None`` keeps the instance's own mode.
        check_invariants: verify feasibility and ``p <= 1`` after every step.
        lazy_filter: decide the filter without always computing the full
            minimum (same decision, fewer evaluations). Only used in float mode.
        record_trace: keep ``|R|`` after every step in the stats.
        slack: slack function for ``MULOW``.
        reference: boundary spin used by ``MULOW``.
        cap: enumeration cap override.
    """

    ell: int = 1
    filter_mode: FilterMode = FilterMode.MUMIN
    max_iterations: int | None = None
    seed: int = 0
    numeric_mode: NumericMode | None = None
    check_invariants: bool = True
    lazy_filter: bool = True
    record_trace: bool = False
    slack: object = default_slack
    reference: int = 0
    cap: int | None = None

    def __post_init__(self):
        self.filter_mode = FilterMode.parse(self.filter_mode)
        if self.numeric_mode is not None:
            self.numeric_mode = NumericMode.parse(self.numeric_mode)
        if self.ell < 0:
            raise ValueError("ell must be nonnegative")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")


@dataclass
class RunStats:
    """Counters for one run.

    ``added`` is the total number of vertices added to ``R`` by rejected
    steps; ``trace`` holds ``|R|`` after each step when recording is on.
    """

    iterations: int = 0
    successes: int = 0
    failures: int = 0
    added: int = 0
    wall_ms: float = 0.0
    trace: list | None = None

    @property
    def filter_failures(self) -> int:
        return self.failures


@dataclass
class RepairState:
    """The evolving pair ``(X, R)`` plus statistics."""

    X: list
    R: SortedList
    stats: RunStats = field(default_factory=RunStats)
    in_R: set = None

    def __post_init__(self):
        if self.in_R is None:
            self.in_R = set(self.R)

    @property
    def done(self) -> bool:
        return not self.R


def _prepare(sys: SpinSystem, cfg: SamplerConfig) -> SpinSystem:
    if cfg.numeric_mode is not None:
        sys = sys.converted(cfg.numeric_mode)
    if cfg.ell == 0 and not sys.is_soft():
        raise HardConstraintRejected("ell = 0 requires every weight to be positive")
    return sys


def init(sys: SpinSystem, cfg: SamplerConfig | None = None) -> RepairState:
    """Greedy feasible start with every vertex marked incorrect."""
    cfg = cfg or SamplerConfig()
    stats = RunStats(trace=[] if cfg.record_trace else None)
    # the greedy start is deterministic, so it is computed once per instance
    start = sys.__dict__.get("_greedy_start")
    if start is None:
        start = sys.__dict__["_greedy_start"] = greedy_feasible(sys)
    return RepairState(list(start), SortedList(range(sys.n)), stats)


def _locally_feasible(sys: SpinSystem, X, block) -> bool:
    for v in block:
        if not sys.b[v, X[v]] > 0:
            return False
        for w, mat in sys.incident[v]:
            if not mat[X[v], X[w]] > 0:
                return False
    return True


def _coordinate_descent(ctx: FilterContext, xs: tuple, rounds: int = 2):
    """A few greedy improvements of the current boundary toward the minimum."""
    q = ctx.sys.q
    k = len(xs)
    sigma = np.array(xs, dtype=np.int64)
    best = None
    for _ in range(rounds):
        cand = np.repeat(sigma[None, :], k * q, axis=0)
        cand[np.arange(k * q), np.repeat(np.arange(k), q)] = np.tile(np.arange(q), k)
        vals = ctx.marginals(cand)
        i = int(np.argmin(vals))
        if best is not None and vals[i] >= best:
            break
        best = float(vals[i])
        sigma = cand[i]
    return best


def _lazy_reject(engine: LocalEngine, loc, x: int, xs: tuple, threshold: float) -> bool:
    """Return True iff the exact minimum is at most ``threshold``.

    Accepts outright below a cheap lower bound, rejects as soon as any
    boundary assignment attains a value at or below the threshold, and only
    otherwise scans every boundary orbit (caching the exact minimum).
    """
    ctx = loc.ctx
    ctx.x = x
    if threshold < engine.lower_bound(loc, x) * (1 - _FLOAT_SLACK):
        return False
    if _coordinate_descent(ctx, xs) <= threshold:
        return True
    classes = spin_classes(ctx.sys)
    best = None
    for chunk in canonical_assignments(len(xs), ctx.sys.q, classes, ctx.distinguished_spins(), cap=engine.cap):
        m = ctx.marginals(chunk).min()
        if m <= threshold:
            return True
        best = m if best is None else min(best, m)
    loc.minima[x] = best
    return False


def _engine(sys: SpinSystem, cfg: SamplerConfig) -> LocalEngine:
    engines = sys.__dict__.setdefault("_engines", {})
    key = (cfg.ell, cfg.cap)
    eng = engines.get(key)
    if eng is None:
        eng = engines[key] = LocalEngine(sys, cfg.ell, cfg.cap)
    return eng


def step(sys: SpinSystem, state: RepairState, cfg: SamplerConfig, rng, *, skip_filter: bool = False) -> RepairState:
    """One iteration of the repair loop; mutates and returns ``state``.

    Random numbers are consumed in a fixed order: the choice of ``u``, then
    the filter coin, then the block redraw. ``skip_filter`` always accepts and
    exists only so tests can check that the filter matters.
    """
    R = state.R
    in_R = state.in_R
    X = state.X
    stats = state.stats
    engine = _engine(sys, cfg)
    if sys.rational:
        u = R[int(rng.integers(len(R)))]
    else:
        u = R[int(rng.random() * len(R))]
    st = engine.structure(in_R, u)
    loc = engine.local(st, X)
    x = X[u]
    xs = tuple(X[w] for w in st.free_boundary)
    row = engine.row(loc, xs)
    current = row.marginal[x]

    if skip_filter:
        accept = True
    elif cfg.filter_mode is FilterMode.MULOW:
        ref = (cfg.reference,) * len(xs)
        m = len(sphere(sys.graph, u, cfg.ell + 1))
        factor = cfg.slack(m)
        if sys.rational and cfg.slack is default_slack and m > 0:
            factor = 1 - Fraction(1, 5 * m)
        numerator = factor * engine.row(loc, ref).marginal[x]
        if numerator > current * (1 if sys.rational else 1 + _FLOAT_SLACK):
            raise _exceeded(cfg, numerator, current)
        if sys.rational:
            accept = exact_bernoulli(Fraction(numerator) / current, rng)
        else:
            accept = float(rng.random()) * current < numerator
    elif sys.rational:
        numerator = engine.minimum(loc, x)
        p = Fraction(numerator) / current
        if p > 1:
            raise _exceeded(cfg, numerator, current)
        accept = exact_bernoulli(p, rng)
    else:
        threshold = float(rng.random()) * current
        known = loc.minima.get(x)
        if known is not None and not cfg.check_invariants:
            accept = threshold < known
        elif cfg.lazy_filter and not cfg.check_invariants:
            accept = not _lazy_reject(engine, loc, x, xs, threshold) if xs else True
        else:
            numerator = engine.minimum(loc, x)
            if numerator > current * (1 + _FLOAT_SLACK):
                raise AssertionError(f"mu_min {numerator} exceeds current marginal {current}")
            accept = threshold < numerator

    if accept:
        spins = engine.sample(st, loc, xs, row, rng)
        for v, a in zip(st.block, spins):
            X[v] = int(a)
        R.remove(u)
        in_R.discard(u)
        stats.successes += 1
        if cfg.check_invariants and not _locally_feasible(sys, X, st.block):
            raise AssertionError("block redraw produced an infeasible configuration")
    else:
        R.update(st.free_boundary)
        in_R.update(st.free_boundary)
        stats.failures += 1
        stats.added += len(st.free_boundary)
    stats.iterations += 1
    if stats.trace is not None:
        stats.trace.append(len(R))
    return state


def _exceeded(cfg, numerator, current):
    if cfg.filter_mode is FilterMode.MULOW:
        return FilterProbabilityExceeded(
            f"filter numerator {numerator} exceeds current marginal {current}; "
            "the spatial-mixing slack does not hold at this radius")
    return AssertionError(f"mu_min {numerator} exceeds current marginal {current}")


def run_detailed(sys: SpinSystem, cfg: SamplerConfig | None = None, rng=None, *, skip_filter: bool = False):
    """Run to termination and return ``(X, stats)``.

    Raises:
        Interrupted: ``cfg.max_iterations`` was reached first. The exception
            carries the stats only; rerunning is unbiased.
    """
    cfg = cfg or SamplerConfig()
    sys = _prepare(sys, cfg)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    start = time.perf_counter()
    state = init(sys, cfg)
    while state.R:
        if cfg.max_iterations is not None and state.stats.iterations >= cfg.max_iterations:
            state.stats.wall_ms = (time.perf_counter() - start) * 1e3
            raise Interrupted(state.stats)
        step(sys, state, cfg, rng, skip_filter=skip_filter)
    state.stats.wall_ms = (time.perf_counter() - start) * 1e3
    return state.X, state.stats


def run(sys: SpinSystem, cfg: SamplerConfig | None = None, rng=None) -> list:
    """Draw one exact sample from the Gibbs distribution of ``sys``."""
    return run_detailed(sys, cfg, rng)[0]


def run_until_success(sys: SpinSystem, cfg: SamplerConfig, rng=None):
    """Restart interrupted runs until one terminates; returns ``(X, restarts)``."""
    restarts = 0
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    while True:
        try:
            return run_detailed(sys, cfg, rng)[0], restarts
        except Interrupted:
            restarts += 1


def run_single_site(sys: SpinSystem, seed=0, cfg: SamplerConfig | None = None) -> list:
    """Single-site sampler: blocks are single vertices.

    Only soft instances are accepted, since a hard neighbour can forbid the
    current spin for some boundary and make the filter numerator zero.

    Args:
        sys: a soft instance.
        seed: an integer seed or a :class:`numpy.random.Generator`.
    """
    if not sys.is_soft():
        raise HardConstraintRejected("the single-site sampler needs every weight to be positive")
    cfg = SamplerConfig(**{**(cfg.__dict__ if cfg else {}), "ell": 0})
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return run(sys, cfg, rng)
