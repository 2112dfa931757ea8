"""Exception types shared across the pipeline.

The CLI maps these onto distinct exit codes, so stages should raise the
most specific type that applies.
"""


class UsageError(Exception):
    """Bad invocation: missing prerequisite artifact, bad flag combination."""


class DataError(Exception):
    """Input data is structurally unusable (empty vocabulary, no seeds, ...)."""


class NumericalError(Exception):
    """A numeric routine produced NaN/inf or otherwise lost its footing."""
