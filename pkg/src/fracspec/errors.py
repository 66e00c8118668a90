"""Exception hierarchy shared by all fracspec modules."""

from __future__ import annotations


class FracspecError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FracspecError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AccuracyError(FracspecError):
    """No evaluation branch can certify the requested accuracy."""


class AliasError(FracspecError, ValueError):
    """Requested modes exceed the alias-free (Nyquist) range of a grid."""


class ZeroModeError(FracspecError, ValueError):
    """A negative operator power was applied to a field with a zero mode."""


class HypothesisError(FracspecError, ValueError):
    """A mathematical hypothesis required by an operation is violated."""


class ConvergenceError(FracspecError):
    """Refinement failed to certify the requested tolerance."""


class MeshError(FracspecError, ValueError):
    """Sample times do not form the uniform mesh an operation requires."""


class RegularityError(FracspecError):
    """Strict-mode regularity gate: the data fail the a > N/2 hypothesis."""


class InconclusiveError(FracspecError):
    """A numerical classification could not bracket a transition."""


class ConfigError(FracspecError, ValueError):
    """A run configuration is malformed or inconsistent."""
