"""Exception types shared across the package.

The CLI maps these onto exit codes: bad flags exit 2 (argparse), DataError
exits 3, InternalError exits 4.
"""


class DataError(ValueError):
    """Malformed or inconsistent input data (files, tensors, labels)."""


class InternalError(RuntimeError):
    """An internal invariant was violated; indicates a bug, not bad input."""
