"""Exception taxonomy shared by all convaffect modules.

The CLI maps these onto exit codes (see cli.EXIT_CODES); everything else
raises them directly and lets the failure carry enough context to act on.
"""


class ConvAffectError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ConvAffectError):
    """Operand shapes do not conform; the message names both shapes."""


class EmptySequenceError(ConvAffectError):
    """An operation received a sequence with no valid positions."""


class NumericError(ConvAffectError):
    """A non-finite value appeared at an operation boundary."""


class ConfigError(ConvAffectError):
    """Invalid configuration value or unusable run setup."""


class DataError(ConvAffectError):
    """Malformed corpus or feature file content."""


class LabelError(DataError):
    """An emotion string outside the eight known labels."""


class ContractError(ConvAffectError):
    """A caller violated an API precondition (lengths, scalar-ness, ...)."""


class CheckpointError(ConvAffectError):
    """Checkpoint format version or config hash mismatch."""


class EvaluationError(ConvAffectError):
    """Metrics were requested over an empty or degenerate evaluation set."""
