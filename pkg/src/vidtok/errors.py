"""Exception types shared across the package.

The CLI maps these onto exit codes: input/format problems exit 1,
budget and contract violations exit 2.
"""


class VidtokError(ValueError):
    """Base class for all package errors."""


class DimensionMismatchError(VidtokError):
    """A size is not compatible with the requested block/patch layout.

    The message always names the offending axis.
    """


class ConfigError(VidtokError):
    """Invalid configuration value (rotary head size, thresholds, ...)."""


class SequenceFormatError(VidtokError):
    """A rendered sequence or event list violates the format rules."""


class ContractViolationError(VidtokError):
    """A pluggable component broke its declared contract."""


class BudgetExceededError(VidtokError):
    """A token budget could not be satisfied.

    Carries the counts that triggered the failure.
    """

    def __init__(self, message, vision_tokens=None, total_tokens=None,
                 max_vision_tokens=None, max_total_tokens=None):
        super().__init__(message)
        self.vision_tokens = vision_tokens
        self.total_tokens = total_tokens
        self.max_vision_tokens = max_vision_tokens
        self.max_total_tokens = max_total_tokens


class UnsatisfiableBudgetError(BudgetExceededError):
    """No allowed resampling can bring the sequence under budget."""
