"""Exception taxonomy shared by all modules.

Errors are split into two families: user-facing input problems (bad files,
bad shapes, degenerate data) and internal numerical failures. The CLI maps
the former to exit code 2 and the latter to exit code 1.
"""


class CkamatchError(Exception):
    """Base class for every error raised by this package."""


class InputError(CkamatchError):
    """Base for problems attributable to user-supplied inputs."""


class StorageError(InputError):
    """File could not be read or written; message names the path."""


class FormatError(InputError):
    """File exists but violates the EMB1/manifest wire format."""


class ValidationError(InputError):
    """An invariant on a value or argument combination is violated."""


class SizeError(ValidationError):
    """Dimension or count mismatch between related inputs."""


class IdLookupError(InputError):
    """An item id referenced by a manifest does not resolve."""


class DegenerateKernelError(InputError):
    """Kernel self-HSIC is numerically zero (e.g. constant embeddings)."""


class DegenerateBandwidthError(DegenerateKernelError):
    """Median-heuristic RBF bandwidth collapsed to zero."""


class DegenerateVectorError(InputError):
    """A vector that must be normalized has zero norm; names the item."""


class UnsupportedSpecError(InputError):
    """An operation was invoked with a kernel spec it does not support."""


class NumericalError(CkamatchError):
    """A linear solve or similar produced no finite result."""
