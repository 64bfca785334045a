"""Exception types. All derive from ValueError so callers can catch broadly."""


class SpikePoolError(ValueError):
    pass


class InvalidStateError(SpikePoolError):
    """A neuron or net received input it cannot integrate (e.g. NaN)."""


class InvalidStructureError(SpikePoolError):
    """A compartment tree is not a rooted binary tree within core limits."""


class EmptyDistributionError(SpikePoolError):
    pass


class InfeasibleMappingError(SpikePoolError):
    """A pooling window cannot be placed on a single neuro-core."""


class BundleError(SpikePoolError):
    """A weight bundle's manifest or data does not match the declared graph."""
