"""Perfect samplers for Gibbs distributions of spin systems.

The main entry points are :func:`run` (exact sample of a spin system),
:func:`dynamic_sample` (keep a sample exact under instance updates) and the
instance builders in :mod:`perfect_gibbs.instances`.
"""

from .dynamic import UpdateBatch, apply_update, dynamic_sample
from .errors import (DegenerateTorus, DuplicateEdge, EmptyEdgeSet, EnumerationCapExceeded,
                     FilterProbabilityExceeded, HardConstraintRejected, InfeasibleGreedyStep,
                     Interrupted, InvalidUpdate, OutcomeMismatch, PerfectGibbsError, TooFewSamples,
                     UnknownVertex, ZeroConditionalPartition, ZeroPartition)
from .graph import Graph, ball, boundary, sphere
from .local import (DiscreteDistribution, brute_force_distribution, marginal, mu_low, mu_min,
                    restricted_system, sample_block)
from .sampler import (FilterMode, RepairState, RunStats, SamplerConfig, init, run, run_detailed,
                      run_single_site, step)
from .spin import (NumericMode, PartialConfiguration, SpinSystem, conditional_partition,
                   conditional_weight, greedy_feasible, is_feasible, is_permissive, weight)

__all__ = [
    "Graph", "ball", "sphere", "boundary",
    "SpinSystem", "PartialConfiguration", "NumericMode", "weight", "conditional_weight",
    "conditional_partition", "is_feasible", "is_permissive", "greedy_feasible",
    "DiscreteDistribution", "restricted_system", "marginal", "sample_block", "mu_min", "mu_low",
    "brute_force_distribution",
    "SamplerConfig", "FilterMode", "RepairState", "RunStats", "init", "step", "run", "run_detailed",
    "run_single_site",
    "UpdateBatch", "apply_update", "dynamic_sample",
    "PerfectGibbsError", "EnumerationCapExceeded", "ZeroPartition", "ZeroConditionalPartition",
    "InfeasibleGreedyStep", "HardConstraintRejected", "FilterProbabilityExceeded", "Interrupted",
    "InvalidUpdate", "DuplicateEdge", "UnknownVertex", "EmptyEdgeSet", "DegenerateTorus",
    "OutcomeMismatch", "TooFewSamples",
]
