"""Shared exception base for data-level failures."""


class DataError(Exception):
    """A problem with input data or a degenerate computation.

    The command-line layer maps every DataError to exit code 2; usage
    mistakes (bad flags, invalid combinations) exit 1 instead.
    """
