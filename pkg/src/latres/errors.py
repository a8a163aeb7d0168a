"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: usage errors exit 2 (argparse),
DataError exits 3, NumericError exits 4.
"""


class LatresError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(LatresError, ValueError):
    """Raised when tensor/plane dimensions are incompatible.

    The message always names both offending shapes so failures in long
    pipelines are attributable without a debugger.
    """

    def __init__(self, op: str, detail: str):
        super().__init__(f"{op}: {detail}")
        self.op = op
        self.detail = detail


class DataError(LatresError, ValueError):
    """Bad input data: unreadable files, empty corpora, out-of-range labels."""


class NumericError(LatresError, RuntimeError):
    """Numeric failure, e.g. training divergence (non-finite loss)."""
