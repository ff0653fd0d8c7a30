"""Exception types raised across the package."""


class ReladvError(ValueError):
    pass


class DomainTooLarge(ReladvError):
    pass


class HueUnsupported(ReladvError):
    pass


class NodeNotInDomain(ReladvError, KeyError):
    pass


class OverlappingGroups(ReladvError):
    pass


class NotReversible(ReladvError):
    pass


class DimensionMismatch(ReladvError):
    pass


class MissingNormalizer(ReladvError):
    pass


class InvalidConfig(ReladvError):
    pass


class OverlappingPartition(ReladvError):
    pass


class GroupBudgetExceeded(ReladvError):
    pass


class EdgeEndpointsMissing(ReladvError):
    pass


class TableIncomplete(ReladvError):
    pass


class DuplicateFeatureId(ReladvError):
    pass


class ChannelOutOfRange(ReladvError):
    pass
