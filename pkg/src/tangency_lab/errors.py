"""Exception hierarchy shared by every module."""


class TangencyLabError(Exception):
    pass


class DomainViolation(TangencyLabError):
    """A point handed to a branch map lies outside that branch's box."""


class OutsideDomain(TangencyLabError):
    """The piecewise map is not defined at the point."""

    def __init__(self, message, point=None, step=None):
        super().__init__(message)
        self.point = point
        self.step = step


class EmptyCylinder(TangencyLabError):
    pass


class RefinementFailure(TangencyLabError):
    def __init__(self, message, generation=None):
        super().__init__(message)
        self.generation = generation


class PrecisionExhausted(TangencyLabError):
    pass


class InvalidL(TangencyLabError):
    pass


class InsufficientDepth(TangencyLabError):
    pass


class Inconclusive(TangencyLabError):
    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class MajorityViolation(TangencyLabError):
    """Some gamma code has more 1-symbols than 0-symbols; ``rows`` lists the counts per index."""

    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = rows or []
