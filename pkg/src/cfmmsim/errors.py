"""Exception hierarchy for the simulator."""


class CfmmError(Exception):
    """Base class for every error raised by cfmmsim."""


# event validation
class AllZeroTrade(CfmmError):
    pass


class NonFiniteValue(CfmmError):
    pass


class BadSolveIndex(CfmmError):
    pass


class MixedSigns(CfmmError):
    pass


class DisproportionateQuote(CfmmError):
    pass


class DimensionMismatch(CfmmError):
    pass


class ZeroValuePool(CfmmError):
    pass


# pool / invariant
class NonPositiveQuantity(CfmmError):
    pass


class InsolventTrade(CfmmError):
    pass


class Overdraw(CfmmError):
    pass


class UnknownLp(CfmmError):
    pass


class NonConvexInvariant(CfmmError):
    pass


# numerics
class NoBracket(CfmmError):
    pass


class SolverNoConverge(CfmmError):
    pass


# concentrated liquidity
class UnsupportedSpec(CfmmError):
    pass


class InconsistentDepth(CfmmError):
    pass


class OffGridRange(CfmmError):
    pass


class PriceOffGrid(CfmmError):
    pass


class EmptyRange(CfmmError):
    pass


class LiquidityExhausted(CfmmError):
    """Trade path left the grid or entered a range without liquidity.

    ``trade`` and ``report`` are filled in by equilibration when a partial
    trade up to the liquidity edge could be constructed.
    """

    def __init__(self, message, *, trade=None, report=None):
        super().__init__(message)
        self.trade = trade
        self.report = report


# metrics
class InconsistentLedger(CfmmError):
    pass


class ZeroHoldValue(CfmmError):
    pass


class UnsupportedWeights(CfmmError):
    pass


# replay / io
class ParseError(CfmmError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonMonotoneTimestamps(ParseError):
    pass


class ConfigError(CfmmError):
    pass


class SimulationError(CfmmError):
    """A module error annotated with the index of the event that caused it."""

    def __init__(self, event_index, cause):
        super().__init__(f"event {event_index}: {type(cause).__name__}: {cause}")
        self.event_index = event_index
        self.cause = cause
