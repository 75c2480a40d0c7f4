"""Exception hierarchy shared by all magspec modules."""


class MagspecError(Exception):
    """Base class for every error raised by magspec."""


class NonRegularCurve(MagspecError):
    pass


class RayEscapes(MagspecError):
    """A normal ray from the inner curve never meets the outer curve."""


class DegenerateRay(MagspecError):
    """A normal ray grazes the outer curve."""


class NotStarlike(MagspecError):
    pass


class NotStrictlyStarlike(NotStarlike):
    pass


class InvalidAnnulus(MagspecError):
    pass


class BadMetricProfile(MagspecError):
    pass


class NotClosed(MagspecError):
    """The 1-form fails the closedness test dA = 0."""


class NotClosedLoop(MagspecError):
    pass


class BadMask(MagspecError):
    pass


class NotSimplyConnected(BadMask):
    pass


class ThinDomainUnderresolved(MagspecError):
    pass


class ZeroVector(MagspecError):
    pass


class BadOperator(MagspecError):
    pass


class SolverStalled(MagspecError):
    """Raised when the eigensolver runs out of iterations.

    The partially converged result is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(MagspecError):
    """Config parse/validation failure; ``errors`` lists ``(line, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = []
        for line, msg in self.errors:
            where = f"line {line}: " if line is not None else ""
            lines.append(where + msg)
        super().__init__("; ".join(lines))
