"""Exception types raised across the package."""


class PerfectGibbsError(Exception):
    """Base class for all package errors."""


class EnumerationCapExceeded(PerfectGibbsError):
    """An exact enumeration would visit more states than the configured cap."""

    def __init__(self, states, cap):
        self.states = states
        self.cap = cap
        super().__init__(f"enumeration of {states} states exceeds cap {cap}")


class ZeroPartition(PerfectGibbsError):
    """The partition function of the instance is zero."""


class ZeroConditionalPartition(ZeroPartition):
    """A conditional partition function is zero (non-permissive input)."""


class InfeasibleGreedyStep(PerfectGibbsError):
    """Greedy construction found no admissible spin at some vertex."""

    def __init__(self, vertex):
        self.vertex = vertex
        super().__init__(f"no admissible spin at vertex {vertex}")


class HardConstraintRejected(PerfectGibbsError):
    """The single-site sampler was given an instance with a zero weight."""


class FilterProbabilityExceeded(PerfectGibbsError):
    """A filter lower bound exceeded the current marginal.

    Raised in ``mulow`` mode when the spatial-mixing slack does not hold for
    the instance, which would otherwise make the acceptance probability > 1.
    """


class Interrupted(PerfectGibbsError):
    """A run hit ``max_iterations`` before terminating.

    Carries the run statistics only, never the partial configuration: the
    intermediate state is biased and must not be used as a sample.
    """

    def __init__(self, stats):
        self.stats = stats
        super().__init__(f"interrupted after {stats.iterations} iterations")


class InvalidUpdate(PerfectGibbsError):
    """Base class for malformed dynamic updates."""


class DuplicateEdge(InvalidUpdate):
    pass


class UnknownVertex(InvalidUpdate):
    pass


class EmptyEdgeSet(PerfectGibbsError):
    pass


class DegenerateTorus(PerfectGibbsError):
    pass


class OutcomeMismatch(PerfectGibbsError):
    pass


class TooFewSamples(PerfectGibbsError):
    pass
