"""Exception types shared across the engine.

Each maps to a distinct failure mode so the CLI can translate them into
documented exit codes (config -> 2, numeric abort -> 3, I/O -> 4).
"""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ParameterError(ValueError):
    """An operation parameter is out of its valid range (e.g. temperature <= 0)."""


class DegenerateInputError(ValueError):
    """Numerically degenerate input, e.g. a zero vector fed to cosine similarity."""


class ContractError(ValueError):
    """A caller violated an operation precondition."""


class CapacityError(ValueError):
    """A learned table was indexed beyond its configured size."""


class ExhaustedPoolError(ValueError):
    """Every candidate is masked; no next selection exists."""


class ConfigError(ValueError):
    """Invalid run configuration (bad field value, unknown strategy, ...)."""


class BudgetExceededError(RuntimeError):
    """An exact enumeration would exceed its stated size budget."""


class TrainingAbortError(RuntimeError):
    """Non-finite value encountered during optimization; training must stop."""


class CheckpointFormatError(ValueError):
    """Checkpoint bytes do not parse; message names the failing offset."""
