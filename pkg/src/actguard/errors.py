"""Exception hierarchy shared by every actguard module."""

from __future__ import annotations


class ActError(Exception):
    """Base class for all actguard errors."""


class ShapeError(ActError, ValueError):
    """Vector lengths disagree (terms vs weights, labels vs metrics, ...)."""


class EmptyInputError(ActError, ValueError):
    """An operation that needs at least one element received none."""


class ConfigError(ActError, ValueError):
    """A guardrail, simulator or run configuration is invalid."""


class ParameterError(ActError, ValueError):
    """A scalar argument is outside its allowed range."""


class NonFiniteError(ActError, ValueError):
    """A weight or score is NaN or infinite where a finite value is required."""


class UndefinedCorrelationError(ActError, ValueError):
    """Pearson correlation requested for a constant input."""


class GridTooLargeError(ActError, ValueError):
    """The joint grid exceeds the configured enumeration cap."""

    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"joint grid has {size} points, cap is {cap}")


class ParseError(ActError, ValueError):
    """A document or record file could not be parsed.

    ``location`` is a line number for line-delimited files, or a key path
    for structured documents.
    """

    def __init__(self, message: str, location: int | str | None = None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class UnsupportedVersionError(ParseError):
    """The document declares a format/formula kind this build cannot read."""


class DataError(ActError, ValueError):
    """A dataset failed validation; ``violations`` lists what went wrong."""

    def __init__(self, violations):
        self.violations = list(violations)
        shown = "; ".join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        if more > 0:
            shown += f"; ... {more} more"
        super().__init__(f"dataset failed validation: {shown}")


class InfeasibleError(ActError):
    """No grid point of a group satisfies all of the group's guardrails.

    Attributes:
        group: metric indices of the offending group.
        best_margins: per-metric ``S_hat - threshold`` at the candidate whose
            worst margin was largest.
        best_candidate: that candidate sub-vector.
    """

    def __init__(self, group, best_margins, best_candidate=None):
        self.group = tuple(group)
        self.best_margins = dict(best_margins)
        self.best_candidate = best_candidate
        margins = ", ".join(f"{i}: {m:+.6g}" for i, m in self.best_margins.items())
        super().__init__(f"group {self.group} infeasible; best margins {{{margins}}}")
