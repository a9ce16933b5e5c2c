"""Exception types shared across the package."""


class QpirlabError(Exception):
    """Base class for all qpirlab errors."""


class LayoutError(QpirlabError, ValueError):
    """Malformed register layout (duplicate labels, bad dimensions, ...)."""


class LayoutMismatch(QpirlabError, ValueError):
    """Two objects that must share a layout do not."""


class DimensionGuardExceeded(QpirlabError, ValueError):
    """A layout or run would exceed the configured dimension guard."""


class ShapeMismatch(QpirlabError, ValueError):
    """A protocol operation does not have the required domain/codomain."""


class SupportViolation(QpirlabError, ValueError):
    """A state escapes the subspace a compressor was built on."""


class NotPositiveSemidefinite(QpirlabError, ValueError):
    """An operator expected to be PSD has eigenvalues below tolerance."""


class CliInputError(QpirlabError, ValueError):
    """Bad command-line input (maps to exit code 1)."""
