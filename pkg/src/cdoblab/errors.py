"""Exception hierarchy shared by all cdoblab modules."""


class CdobLabError(ValueError):
    """Base class for every error raised by this package."""


class NonPositiveSpeed(CdobLabError):
    pass


class InvalidGeometry(CdobLabError):
    pass


class TooFewPoints(CdobLabError):
    pass


class TooFewPointsPerSegment(CdobLabError):
    pass


class SingularFit(CdobLabError):
    pass


class DegenerateTangent(CdobLabError):
    pass


class OutOfRange(CdobLabError):
    pass


class ImproperTf(CdobLabError):
    pass


class NonMinimumPhase(CdobLabError):
    """Raised when a plant to be inverted has zeros on or right of the imaginary axis."""

    def __init__(self, zeros):
        self.zeros = list(zeros)
        listed = ", ".join(f"{z:.6g}" for z in self.zeros)
        super().__init__(f"plant has non-minimum-phase zeros: {listed}")


class ImproperResult(CdobLabError):
    pass


class WrongMode(CdobLabError):
    pass


class EmptyRegion(CdobLabError):
    pass


class ConfigError(CdobLabError):
    """Configuration problem; carries the offending line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass
