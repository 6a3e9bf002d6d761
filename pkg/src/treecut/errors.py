"""Exception types shared across the package."""


class TreecutError(Exception):
    """Base class for all treecut errors."""


class TreeStructureError(TreecutError):
    """A parent/child description does not encode a strongly binary tree."""


class NotBinaryError(TreeStructureError):
    """Some node has exactly one child, or more than two."""


class CyclicError(TreeStructureError):
    """Parent pointers contain a cycle."""


class MultipleRootsError(TreeStructureError):
    """Zero or more than one node without a parent."""


class DisconnectedError(TreeStructureError):
    """Some node is unreachable from the root."""


class InvalidCutError(TreecutError):
    """A node set is not an antichain covering all leaves."""


class LeafNodeError(TreecutError):
    """An internal node was required but a leaf id was given."""


class SameLeafError(TreecutError):
    """A pair operation received twice the same leaf."""


class LengthMismatchError(TreecutError):
    """Per-leaf data does not have one entry per leaf."""


class UniverseMismatchError(TreecutError):
    """Two clusterings/oracles do not share the same leaf universe."""


class BudgetTooLargeError(TreecutError):
    """A requested budget exceeds what the tree structure supports."""


class BudgetExhaustedError(TreecutError):
    """The pair-query budget ran out mid-run."""


class InconsistentLabelsError(TreecutError):
    """A revealed node label contradicts labels implied by the hierarchy."""


class EmptyForestError(TreecutError):
    """A path was requested from an empty search forest."""


class ParseError(TreecutError):
    """A data file could not be parsed."""


class DimensionMismatchError(TreecutError):
    """Vectors in one point set have differing dimensions."""


class TooFewPointsError(TreecutError):
    """Agglomeration needs at least two points."""


class MemoryBudgetExceededError(TreecutError):
    """A distance-matrix method refused an input beyond its size cap."""


class EmptyGridError(TreecutError):
    """Parameter tuning received an empty grid."""


class BadSizeError(TreecutError):
    """A tree generator received an unsupported size."""
