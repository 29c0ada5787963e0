"""Exception hierarchy shared by all t2av modules.

Three failure families map onto the CLI's exit codes: usage problems are
raised by argparse itself, data/format problems raise :class:`DataError`
(or one of the :class:`FormatError` subclasses), and numerical breakdowns
raise :class:`NumericalError`.
"""


class T2avError(Exception):
    """Base class for all errors raised by this package."""


class DataError(T2avError):
    """Invalid shapes, out-of-range indices, or violated preconditions."""


class FormatError(DataError):
    """A file does not conform to the T2AVEMB1 or manifest layout."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(FormatError):
    """Header declares an unsupported format version."""


class TruncatedPayloadError(FormatError):
    """Payload is shorter (or longer) than the header declares."""


class NonFiniteValueError(FormatError):
    """Payload contains NaN or Inf."""


class NumericalError(T2avError):
    """An iterative solver failed to converge or produced an indefinite result."""
