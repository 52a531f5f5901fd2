"""Exception types shared across the package.

Precondition violations (bad indices, wrong shapes, out-of-range labels)
raise plain ValueError. The classes below exist so the CLI can map failure
modes onto its exit-code contract: data problems exit 2, numeric blowups
exit 4, config problems exit 3 (argparse/ValueError at option-resolution
time).
"""


class DataError(Exception):
    """Archive missing, malformed, or inconsistent with expectations."""


class NumericError(Exception):
    """Non-finite loss or otherwise unusable numeric state during a run."""


class UndefinedMetric(ValueError):
    """Metric requested on degenerate input (empty matrix, single-class truth)."""
