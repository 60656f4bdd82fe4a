"""Exception types raised across the package."""


class RevuzLabError(ValueError):
    """Base class for all validation and numerical errors."""


class AsymmetricGenerator(RevuzLabError):
    def __init__(self, pair, residual):
        self.pair = pair
        self.residual = residual
        super().__init__(
            f"generator is not m-symmetric at pair {pair!r} (residual {residual:.3e})"
        )


class NonpositiveWeight(RevuzLabError):
    pass


class NegativeRate(RevuzLabError):
    pass


class NonpositiveTime(RevuzLabError):
    pass


class NegativeAlpha(RevuzLabError):
    pass


class ZeroAlphaOnConservativeChain(RevuzLabError):
    pass


class EmptySubset(RevuzLabError):
    pass


class NumericalBreakdown(RevuzLabError):
    pass


class NegativeDensity(RevuzLabError):
    pass


class MismatchedPaths(RevuzLabError):
    pass


class ConservativeChain(RevuzLabError):
    pass


class NotConservative(RevuzLabError):
    pass


class NestNotIncreasing(RevuzLabError):
    pass


class NestUnionIncomplete(RevuzLabError):
    pass


class ConfigError(RevuzLabError):
    """Malformed scenario/config file; ``where`` names the field or line."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class AssumptionNotVerified(UserWarning):
    """The convergence hypothesis could not be confirmed on the supplied data."""
