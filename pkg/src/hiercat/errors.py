"""Exception hierarchy shared by all hiercat modules."""


class HierCatError(Exception):
    """Base class for all library errors."""


# hierarchy
class HierarchyError(HierCatError, ValueError):
    pass


class MultiParentError(HierarchyError):
    pass


class OrphanNodeError(HierarchyError):
    pass


class EmptyInteriorError(HierarchyError):
    pass


class LevelGapError(HierarchyError):
    pass


class DuplicateLeafError(HierarchyError):
    pass


class NotALeafError(HierCatError, ValueError):
    pass


# dataset
class ZeroVarianceError(HierCatError, ValueError):
    pass


class DataFormatError(HierCatError, ValueError):
    pass


# nnet
class ShapeMismatchError(HierCatError, ValueError):
    pass


class NonFiniteLossError(HierCatError, FloatingPointError):
    pass


class NonPositivePredictionError(HierCatError, ValueError):
    pass


# embeddings
class MissingLeafError(HierCatError, KeyError):
    pass


# clustering
class DimensionMismatchError(HierCatError, ValueError):
    pass


class KOutOfRangeError(HierCatError, ValueError):
    pass


class SingleClusterError(HierCatError, ValueError):
    pass


# glm
class NotASiblingError(HierCatError, ValueError):
    pass


class RankDeficientError(HierCatError, ValueError):
    pass


class IrlsDivergedError(HierCatError, ArithmeticError):
    pass


class DegenerateFitError(HierCatError, ArithmeticError):
    pass


class UnmappedLeafError(HierCatError, KeyError):
    pass
