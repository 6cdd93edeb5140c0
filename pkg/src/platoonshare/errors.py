"""Exception types shared across the package."""


class PlatoonShareError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PlatoonShareError, ValueError):
    """A configuration value violates one of its invariants."""


class DomainError(PlatoonShareError, ValueError):
    """A numeric argument is outside the domain of a formula."""


class UsageError(PlatoonShareError):
    """An operation was asked about a link the allocation does not hold."""


class InvariantError(PlatoonShareError):
    """An allocation breaks a structural constraint that an operation relies on."""


class CoverageError(PlatoonShareError):
    """A platoon member is not reached by any groupcasting vehicle."""


class ConstraintError(PlatoonShareError):
    """A relay candidate lies outside the leader's groupcast range."""


class InfeasibleError(PlatoonShareError):
    """No admissible allocation exists for the requested link."""


class ResourceExhaustedError(PlatoonShareError):
    """The subchannel (or IE) pool ran out."""


class PartitionInfeasible(PlatoonShareError):
    """Every cluster already holds a neighbour of the PMV being placed."""

    def __init__(self, pmv, num_clusters):
        super().__init__(f"PMV {pmv} fits in none of {num_clusters} clusters")
        self.pmv = pmv
        self.num_clusters = num_clusters
