"""Command-line interface: ``perfect-gibbs {sample,verify,bench,dynamic,probe}``.

Exit codes: 0 success, 1 statistical failure, 2 enumeration cap or other
resource limit, 3 usage or malformed input.
"""

import argparse
import csv
import math
import sys as _sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, instances
from .dynamic import dynamic_sample_detailed
from .errors import (EnumerationCapExceeded, InfeasibleGreedyStep, Interrupted, InvalidUpdate,
                     PerfectGibbsError, ZeroPartition)
from .io import load_instance, load_update
from .local import brute_force_distribution
from .sampler import SamplerConfig, run_detailed

EXIT_OK, EXIT_FAIL, EXIT_RESOURCE, EXIT_USAGE = 0, 1, 2, 3
CHUNK = 1000  # samples per independently seeded chunk
ALPHA = 1e-3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# instance sources


def parse_graph(source: str):
    """``grid:WxH``, ``torus:WxH``, ``file:PATH`` or ``random:n,p,seed`` -> Graph.

    ``file:PATH`` reads the graph of an instance JSON file.
    """
    kind, _, arg = source.partition(":")
    if kind == "file":
        try:
            return load_instance(arg).graph
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read graph from {arg!r}: {exc}") from None
    try:
        if kind in ("grid", "torus"):
            w, h = (int(t) for t in arg.lower().split("x"))
            return instances.grid_graph(w, h, torus=kind == "torus")
        if kind == "random":
            n, p, seed = arg.split(",")
            return instances.erdos_renyi(int(n), float(p), int(seed))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad graph source {source!r}: {exc}") from None
    raise UsageError(f"unknown graph source {source!r}; use grid:WxH, torus:WxH, file:PATH or random:n,p,seed")


def build_instance(args):
    source = args.instance or args.graph
    if source is None:
        raise UsageError("give --graph or --instance")
    # file:PATH without --model loads the whole instance; with --model only its graph is used
    if args.instance or (source.startswith("file:") and args.model is None):
        path = source[5:] if source.startswith("file:") else source
        try:
            return load_instance(Path(path), numeric=args.numeric)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot load instance {path}: {exc}") from None
    g = parse_graph(source)
    model = args.model
    if model == "coloring":
        if args.q is None:
            raise UsageError("--model coloring needs --q")
        sys = instances.coloring_instance(g, args.q)
    elif model == "hardcore":
        sys = instances.hardcore_instance(g, args.lam)
    elif model == "ising":
        sys = instances.ising_instance(g, args.coupling)
    elif model == "matching":
        sys = instances.monomer_dimer_instance(g, args.lam)[0]
    else:
        raise UsageError("give --model {coloring,hardcore,ising,matching}")
    return sys.converted(args.numeric) if args.numeric else sys


def _config(args, **extra) -> SamplerConfig:
    return SamplerConfig(ell=args.ell, filter_mode=getattr(args, "mode", "mumin"),
                         max_iterations=getattr(args, "max_iterations", None), seed=args.seed,
                         check_invariants=getattr(args, "check", False), **extra)


# ---------------------------------------------------------------------------
# sampling in seeded chunks


def _sample_chunk(job):
    """Draw samples ``start..stop`` with the generator of their chunk."""
    sys, cfg, seed, chunk, count, sampler = job
    rng = np.random.default_rng([seed, chunk])
    out = []
    for _ in range(count):
        restarts = 0
        while True:
            try:
                if sampler is None:
                    X, st = run_detailed(sys, cfg, rng)
                else:
                    X, st = sampler(sys, cfg, rng)
                break
            except Interrupted:
                restarts += 1
        out.append((tuple(X), st.iterations, st.failures, st.added, restarts))
    return out


def draw_samples(sys, cfg, n_samples: int, seed: int, jobs: int = 1, sampler=None) -> list:
    """``n_samples`` independent runs; identical output for any ``jobs``."""
    jobs_list = []
    for c, start in enumerate(range(0, n_samples, CHUNK)):
        jobs_list.append((sys, cfg, seed, c, min(CHUNK, n_samples - start), sampler))
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_sample_chunk, jobs_list))
    else:
        parts = [_sample_chunk(j) for j in jobs_list]
    return [r for part in parts for r in part]


def _write_samples(rows, out):
    lines = "".join(" ".join(map(str, r[0])) + "\n" for r in rows)
    if out in (None, "-"):
        _sys.stdout.write(lines)
    else:
        Path(out).write_text(lines)


def _write_stats(rows, path, extra_header=(), extra=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("sample", "T", "failures", "added", "restarts") + tuple(extra_header))
        for i, r in enumerate(rows):
            w.writerow((i,) + tuple(r[1:]) + (tuple(extra[i]) if extra else ()))


def _stats_path(args):
    if args.stats:
        return args.stats
    if args.out and args.out != "-":
        return args.out + ".stats.csv"
    return None


# ---------------------------------------------------------------------------
# commands


def cmd_sample(args, sampler=None):
    sys = build_instance(args)
    rows = draw_samples(sys, _config(args), args.samples, args.seed, args.jobs, sampler)
    _write_samples(rows, args.out)
    path = _stats_path(args)
    if path:
        _write_stats(rows, path)
    return EXIT_OK


def verify(sys, cfg, n_samples, seed, jobs=1, sampler=None):
    """Sample ``n_samples`` times and test against the enumerated distribution.

    Returns ``(chi_square_result, tv_distance)``.
    """
    exact = brute_force_distribution(sys, cfg.cap)
    rows = draw_samples(sys, cfg, n_samples, seed, jobs, sampler)
    counts = Counter(r[0] for r in rows)
    res = diagnostics.chi_square_gof(counts, exact)
    tv = diagnostics.tv_distance(diagnostics.empirical(r[0] for r in rows), exact)
    return res, tv


def cmd_verify(args, sampler=None):
    sys = build_instance(args)
    res, tv = verify(sys, _config(args), args.samples, args.seed, args.jobs, sampler)
    verdict = "PASS" if res.passes(ALPHA) else "FAIL"
    print(f"{verdict} chi2={res.statistic:.4f} dof={res.dof} p={res.p_value:.6g} tv={tv:.6f} "
          f"samples={args.samples} outcomes={res.bins}")
    return EXIT_OK if res.passes(ALPHA) else EXIT_FAIL


def cmd_bench(args):
    if args.model != "coloring":
        raise UsageError("bench supports --model coloring on square grids")
    sizes = [int(s) for s in args.sizes.split(",")]
    for n in sizes:
        if math.isqrt(n) ** 2 != n:
            raise UsageError(f"size {n} is not a perfect square")
    cfg = SamplerConfig(ell=args.ell, check_invariants=False)
    rows = diagnostics.bench_scaling(diagnostics.grid_coloring_model(args.q), sizes, args.trials, cfg,
                                     seed=args.seed, timeout_s=args.timeout)
    text = diagnostics.bench_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        _sys.stdout.write(text)
    for r in rows:
        if r.timed_out:
            print(f"size {r.n}: timed out after {r.trials} trials", file=_sys.stderr)
    return EXIT_OK


def _dynamic_chunk(job):
    sys, upd, cfg, seed, chunk, count = job
    rng = np.random.default_rng([seed, chunk])
    out = []
    for _ in range(count):
        X, st0 = run_detailed(sys, cfg, rng)
        Y, _, st = dynamic_sample_detailed(sys, X, upd, cfg, rng)
        out.append((tuple(Y), st0.iterations, st.iterations))
    return out


def cmd_dynamic(args):
    sys = build_instance(args)
    try:
        upd = load_update(Path(args.update))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load update {args.update}: {exc}") from None
    cfg = _config(args)
    jobs_list = [(sys, upd, cfg, args.seed, c, min(CHUNK, args.samples - s))
                 for c, s in enumerate(range(0, args.samples, CHUNK))]
    if args.jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            parts = list(ex.map(_dynamic_chunk, jobs_list))
    else:
        parts = [_dynamic_chunk(j) for j in jobs_list]
    rows = [r for p in parts for r in p]
    _write_samples(rows, args.out)
    path = _stats_path(args)
    if path:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("sample", "T_static", "T_repair"))
            for i, r in enumerate(rows):
                w.writerow((i, r[1], r[2]))
    return EXIT_OK


def cmd_probe(args):
    sys = build_instance(args)
    if args.gamma:
        g = diagnostics.gamma_probe(sys, args.ell)
        print(f"gamma(ell={args.ell}) = {g:.6g}")
        if g == 0:
            print("warning: gamma is zero; some filter evaluation can reject with certainty", file=_sys.stderr)
        return EXIT_OK
    print("v,ell,sphere,ratio_bound,weak_bound,threshold,ratio_ok,weak_ok")
    for e in diagnostics.ssm_report(sys, args.ell):
        print(f"{e.v},{e.ell},{e.sphere_size},{e.ratio_bound:.6g},{e.weak_bound:.6g},{e.threshold:.6g},"
              f"{int(e.ratio_ok)},{int(e.weak_ok)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _instance_args(p):
    p.add_argument("--instance", help="instance JSON file")
    p.add_argument("--graph", help="grid:WxH, torus:WxH, file:PATH or random:n,p,seed")
    p.add_argument("--model", choices=("coloring", "hardcore", "ising", "matching"))
    p.add_argument("--q", type=int, help="number of colors (coloring)")
    p.add_argument("--lam", type=float, default=1.0, help="fugacity (hardcore, matching)")
    p.add_argument("--coupling", type=float, default=0.0, help="Ising coupling")
    p.add_argument("--numeric", choices=("f64", "rational"))
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def _sampling_args(p):
    p.add_argument("--mode", choices=("mumin", "mulow"), default="mumin")
    p.add_argument("--max-iterations", type=int, dest="max_iterations")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--check", action="store_true", help="verify invariants after every step")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="perfect-gibbs", description="Perfect sampling for spin systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="draw exact samples")
    _instance_args(p)
    _sampling_args(p)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--out", help="sample file (default stdout)")
    p.add_argument("--stats", help="stats CSV (default OUT.stats.csv)")

    p = sub.add_parser("verify", help="compare samples with the enumerated distribution")
    _instance_args(p)
    _sampling_args(p)
    p.add_argument("--samples", type=int, required=True)

    p = sub.add_parser("bench", help="iteration and time scaling on grid colorings")
    p.add_argument("--model", default="coloring")
    p.add_argument("--q", type=int, default=9)
    p.add_argument("--sizes", required=True, help="comma-separated vertex counts (perfect squares)")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, help="seconds per size")
    p.add_argument("--out", help="CSV file (default stdout)")

    p = sub.add_parser("dynamic", help="sample, apply an update, repair")
    _instance_args(p)
    _sampling_args(p)
    p.add_argument("--update", required=True, help="update JSON file")
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--stats")

    p = sub.add_parser("probe", help="brute-force mixing and gamma probes")
    _instance_args(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--ssm", action="store_true")
    g.add_argument("--gamma", action="store_true")
    return parser


COMMANDS = {"sample": cmd_sample, "verify": cmd_verify, "bench": cmd_bench,
            "dynamic": cmd_dynamic, "probe": cmd_probe}


def main(argv=None, sampler=None) -> int:
    """Entry point. ``sampler`` replaces the sampler in sample/verify (tests only)."""
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "samples", 1) is not None and getattr(args, "samples", 1) < 1:
            raise UsageError("--samples must be positive")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be positive")
        fn = COMMANDS[args.command]
        return fn(args, sampler) if args.command in ("sample", "verify") else fn(args)
    except UsageError as exc:
        print(f"perfect-gibbs: error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except EnumerationCapExceeded as exc:
        print(f"perfect-gibbs: {exc}", file=_sys.stderr)
        return EXIT_RESOURCE
    except (InfeasibleGreedyStep, ZeroPartition, InvalidUpdate) as exc:
        print(f"perfect-gibbs: invalid input: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except (PerfectGibbsError, ValueError) as exc:
        print(f"perfect-gibbs: error: {exc}", file=_sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
