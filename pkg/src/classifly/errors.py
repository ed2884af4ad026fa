"""Exception hierarchy shared across the package.

Everything raised deliberately derives from :class:`ClassiflyError`.
``DataError`` subclasses indicate unusable input and map to CLI exit code 2;
anything else escaping a command is treated as an internal error (exit 3).
"""


class ClassiflyError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ClassiflyError):
    """Invalid or unusable input data."""


class MalformedHeader(DataError):
    """A CSV source does not carry the expected header."""


class MalformedRow(DataError):
    """A CSV row failed validation while parsing in strict mode."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class UnsortedInput(DataError):
    """State vectors were not sorted by time."""


class MixedAircraft(DataError):
    """States from more than one transponder address in a single-aircraft op."""


class InvalidQ(DataError):
    """Quantile count must be an integer >= 2."""


class EmptyGroup(DataError):
    """A feature group had no derivable samples."""

    def __init__(self, group):
        super().__init__(f"feature group {group} has no samples")
        self.group = group


class EmptyValues(DataError):
    """An operation received an empty value multiset."""


class EmptyInput(DataError):
    """An analysis operation received empty input."""


class DegenerateLabels(DataError):
    """Fewer than two distinct labels where a discrimination task needs them."""


class TooFewRows(DataError):
    """Not enough rows for the requested statistic."""


class TooFewSamples(DataError):
    """Not enough training samples for the requested model."""


class NoPosition(DataError):
    """A flight carries no positional state at all."""


class MalformedRegistry(DataError):
    """An aircraft registry file could not be parsed."""

    def __init__(self, message, source=None):
        super().__init__(message)
        self.source = source


class EmptyDataset(DataError):
    """Dataset construction kept zero aircraft."""


class InvalidArchetype(DataError):
    """A synthetic-fleet archetype definition is unusable."""
