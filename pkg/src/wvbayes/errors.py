"""Exception hierarchy shared by every module of the package."""


class WeakValueError(Exception):
    """Base class for all errors raised by wvbayes."""


class BasisMismatch(WeakValueError):
    def __init__(self, left, right):
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"basis mismatch: {self.left!r} vs {self.right!r}")


class ZeroNorm(WeakValueError):
    pass


class InvalidState(WeakValueError):
    pass


class OrthogonalPostSelection(WeakValueError):
    """An overlap in a weak-value denominator vanishes (``|<z|psi>| <= 1e-12``)."""

    def __init__(self, message, which=None):
        self.which = which
        super().__init__(message)


class IncompleteBasis(WeakValueError):
    pass


class DegenerateLoop(WeakValueError):
    pass


class ZeroNormPort(WeakValueError):
    """The post-selection probability of a port vanishes; there is nothing to sample."""


class BothPortsDark(WeakValueError):
    pass


class ConfigError(WeakValueError):
    pass


class InsufficientSamples(WeakValueError):
    pass


class ZeroCoupling(WeakValueError):
    pass


class DegenerateDenominator(WeakValueError):
    pass


class MismatchedRuns(WeakValueError):
    pass
