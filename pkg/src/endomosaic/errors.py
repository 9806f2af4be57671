"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto process exit codes: usage problems exit 1,
DataError exits 2, RegistrationError exits 3.
"""


class MosaicError(Exception):
    """Base class for all pipeline errors."""


class DataError(MosaicError):
    """Invalid input data or geometry (bad dimensions, out-of-bounds regions,
    unreadable files, malformed manifests)."""


class RegistrationError(MosaicError):
    """Registration could not produce a usable frame chain."""
