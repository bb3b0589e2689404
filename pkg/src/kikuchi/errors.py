"""Exception types shared across the package."""


class KikuchiError(Exception):
    """Base class for all package errors."""


class DuplicateRegion(KikuchiError):
    pass


class EmptyRegion(KikuchiError):
    pass


class VertexOutOfRange(KikuchiError):
    pass


class NotTwoLayer(KikuchiError):
    """Some containment relates two non-singleton regions."""


class ScopeMismatch(KikuchiError):
    pass


class NotNormalized(KikuchiError):
    pass


class SupportViolation(KikuchiError):
    """p puts mass where q is zero."""


class InvalidPseudomarginals(KikuchiError):
    pass


class TooLarge(KikuchiError):
    """Joint state space exceeds the brute-force cap."""


class TooManyRegions(KikuchiError):
    pass


class TooManyVertices(KikuchiError):
    pass


class TooManyFactors(KikuchiError):
    pass


class HallConditionViolated(KikuchiError):
    """Carries a left-side subset whose weight exceeds its neighborhood's."""

    def __init__(self, subset):
        self.subset = tuple(sorted(subset))
        super().__init__(f"saturating labeling impossible, violating subset {self.subset}")


class BoundaryPoint(KikuchiError):
    """Pseudomarginal too close to the boundary for finite differencing."""


class InfeasiblePoint(KikuchiError):
    """Symmetric-moment parameters produce a negative table entry."""


class NonPositiveWeight(KikuchiError):
    pass


class NonIntegerWeight(KikuchiError):
    pass


class BadFamilyParameter(KikuchiError):
    pass


class NotPerfectSquare(KikuchiError):
    pass


class TooSmall(KikuchiError):
    pass


class InvalidWeights(KikuchiError):
    """Zero or canceling region weights that the message updates divide by."""


class NonPositiveEdgeWeight(KikuchiError):
    pass


class NonFiniteMessage(KikuchiError):
    """Numeric blowup during message passing; carries the iteration index."""

    def __init__(self, iteration):
        self.iteration = iteration
        super().__init__(f"non-finite message at iteration {iteration}")
