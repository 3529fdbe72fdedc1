"""Exception types raised across the package.

Everything derives from NeedlestackError so callers can catch broadly;
the input-shaped ones also derive from ValueError.
"""


class NeedlestackError(Exception):
    pass


class BadMagicError(NeedlestackError, ValueError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(NeedlestackError, ValueError):
    """Container version is not supported by this build."""


class TruncatedFileError(NeedlestackError, ValueError):
    """File ended before the declared payload was complete."""


class DimMismatchError(NeedlestackError, ValueError):
    """Vector/matrix dimensions disagree with the declared shape."""


class NonFiniteValueError(NeedlestackError, ValueError):
    """NaN or Inf where only finite values are allowed."""


class NonFiniteInputError(NonFiniteValueError):
    """Training input contains NaN or Inf."""


class IoFailureError(NeedlestackError, OSError):
    """Underlying read/write failed."""


class MalformedLineError(NeedlestackError, ValueError):
    """Text line does not match the expected column layout."""


class EmptyJudgmentsError(NeedlestackError, ValueError):
    """Relevance judgment file contains no usable lines."""


class UnknownIdError(NeedlestackError, KeyError):
    """Identifier does not resolve against the corpus index."""


class UnknownQueryError(NeedlestackError, KeyError):
    """Run references a query absent from the judgments."""


class EmptyInputError(NeedlestackError, ValueError):
    """Operation requires at least one row."""


class LengthMismatchError(NeedlestackError, ValueError):
    """Paired vectors have different lengths."""


class EmptySubsetError(NeedlestackError, ValueError):
    """Search was restricted to an empty index subset."""


class InvalidParamsError(NeedlestackError, ValueError):
    """Configuration values violate a precondition."""


class InfeasiblePointError(NeedlestackError, ValueError):
    """Dual variables violate the box or equality constraint."""
