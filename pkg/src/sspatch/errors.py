"""Exception hierarchy shared across the toolkit.

Every error that should surface to a CLI user carries a short machine-readable
category and the process exit code the CLI maps it to.  Programming errors
(bad argument shapes, contract misuse) stay plain ``ValueError``.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DETECTOR = 4
EXIT_INFEASIBLE = 5


class SspatchError(Exception):
    """Base class for reportable toolkit errors."""

    category = "internal"
    exit_code = 1


class DataError(SspatchError):
    """Missing or malformed dataset / annotation / report input."""

    category = "data"
    exit_code = EXIT_DATA


class DetectorTransportError(SspatchError):
    """External detector child process misbehaved (handshake, ids, death)."""

    category = "detector"
    exit_code = EXIT_DETECTOR


class InfeasibleError(SspatchError):
    """A requested configuration cannot be realized (sampling, scale, size)."""

    category = "infeasible"
    exit_code = EXIT_INFEASIBLE


class UndefinedMetricError(DataError):
    """Raised when a metric has an empty denominator (no ground truth / no TPs)."""
