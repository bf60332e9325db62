"""Exception hierarchy shared by the library."""


class GfidError(Exception):
    """Base class for all library errors."""


class NonSymmetric(GfidError, ValueError):
    pass


class EigFailure(GfidError, RuntimeError):
    pass


class InvalidParams(GfidError, ValueError):
    pass


class ConnectivityTimeout(GfidError, RuntimeError):
    pass


class OrderExceedsMinimalPolynomial(GfidError, ValueError):
    pass


class DegenerateFilter(GfidError, ValueError):
    pass


class InvalidRule(GfidError, ValueError):
    pass


class FewerThanTwoBlocks(GfidError, ValueError):
    pass


class NonIncreasingOrders(GfidError, ValueError):
    pass


class LengthMismatch(GfidError, ValueError):
    pass


class ZeroTruth(GfidError, ValueError):
    pass


class SvdFailure(GfidError, RuntimeError):
    pass


class EmptySupport(GfidError, ValueError):
    pass


class InvalidScheme(GfidError, ValueError):
    pass


class Infeasible(GfidError, RuntimeError):
    pass


class MaxIterations(GfidError, RuntimeError):
    pass


class SingularInner(GfidError, RuntimeError):
    pass


class RankDeficientSupport(GfidError, RuntimeError):
    pass


class ZeroSignalWithNoise(GfidError, ValueError):
    pass


class ConfigError(GfidError, ValueError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class IoError(GfidError, OSError):
    pass
