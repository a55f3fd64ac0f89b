"""Exception types shared across the package."""


class EsparSimError(Exception):
    """Base class for all errors raised by this package."""


class SingularNetwork(EsparSimError):
    """An impedance network is singular or too ill-conditioned to invert."""


class DegenerateMatch(EsparSimError):
    """Return loss is undefined because the input and source impedances cancel."""


class NotPsd(EsparSimError):
    """A matrix required to be Hermitian positive semi-definite is not."""


class SingularChannel(EsparSimError):
    """A channel matrix that must be inverted is singular or ill-conditioned."""


class RankError(EsparSimError):
    """The interference subspace at a receiver leaves no interference-free dimension."""


class ZeroTargetEntry(EsparSimError):
    """A target current entry is (numerically) zero where the closed form divides by it."""


class OptimizerFailed(EsparSimError):
    """The load optimizer hit an internal error (not mere infeasibility)."""


class InsufficientPoints(EsparSimError):
    """Not enough sweep points for the requested fit."""


class ConfigError(EsparSimError):
    """Invalid run configuration; the message names the offending field."""
