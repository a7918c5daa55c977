"""Exception types shared across the pipeline.

Plain ``ValueError`` is used for invalid arguments; the classes here cover
the remaining failure kinds that callers may want to catch separately.
"""


class ContractViolation(Exception):
    """A pluggable component returned data that breaks its declared contract."""


class CapacityError(Exception):
    """An input exceeds a fixed capacity (sequence budget, positional table)."""


class ParseError(Exception):
    """Structured text could not be parsed; the message names the offending parts."""


class NumericalFailure(Exception):
    """A computation produced non-finite values; the message names the step."""
