"""Exception hierarchy shared by the whole package.

The CLI maps these onto process exit codes: configuration / geometry /
contract problems exit 2, exhausted conditioning (rejection sampling never
produced an admissible sample) exits 3, and resource-capacity refusals
exit 4.  Everything else is a plain bug and propagates.
"""

from __future__ import annotations


class PercoshapeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PercoshapeError):
    """Invalid configuration, parameters, or contract violation (exit 2)."""


class GeometryError(ConfigError):
    """Geometric precondition failed (object escapes box, unbounded, ...)."""


class CoverageError(ConfigError):
    """A direction table does not cover a requested direction."""


class ConditioningError(PercoshapeError):
    """Conditioning by rejection sampling failed or was exhausted (exit 3)."""


class ConstructionFailedError(ConditioningError):
    """A cutset construction rejected this sample (counted, not fatal).

    ``reason`` is a short machine-readable tag: ``origin-isolated``,
    ``origin-cut``, or ``separation-failed``.
    """

    def __init__(self, message: str, reason: str = "origin-cut") -> None:
        super().__init__(message)
        self.reason = reason


class CapacityError(PercoshapeError):
    """Problem size exceeds the configured resource budget (exit 4)."""
