"""Exception hierarchy shared across the toolkit."""


class SwipeQoeError(Exception):
    """Base class for all toolkit errors."""


class DesignError(SwipeQoeError, ValueError):
    """Invalid stimulus design input (bad pattern/delay combination, bad durations)."""


class InvalidSessionError(SwipeQoeError, ValueError):
    """A session violates its structural invariants."""


class UnknownModelError(SwipeQoeError, KeyError):
    """Requested model id is not present in the registry."""


class BaselineUnavailableError(SwipeQoeError, RuntimeError):
    """Baseline is registered as an adapter slot but no external scorer is configured."""


class NonAlignableError(SwipeQoeError, ValueError):
    """Alignment regression is undefined (zero variance in the predictions)."""


class UnidentifiableFitError(SwipeQoeError, ValueError):
    """The delay features are degenerate; the model coefficients cannot be identified."""


class UndefinedCorrelationError(SwipeQoeError, ValueError):
    """Correlation is undefined because one of the inputs has zero variance."""


class UnfittableSosError(SwipeQoeError, ValueError):
    """No usable records for the SOS fit (all MOS values at the scale extremes)."""


class InfeasibleMomentsError(SwipeQoeError, ValueError):
    """No score distribution on {1..5} has the requested mean/variance pair."""


class NonTerminatingSessionError(SwipeQoeError, RuntimeError):
    """Simulated session cannot finish within the wall-clock cap (bandwidth starved)."""


class ParseError(SwipeQoeError, ValueError):
    """Malformed input file; carries line (1-based) and column/field context."""

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, column: str | int | None = None):
        self.path = path
        self.line = line
        self.column = column
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        prefix = ":".join(loc)
        super().__init__(f"{prefix}: {message}" if prefix else message)
