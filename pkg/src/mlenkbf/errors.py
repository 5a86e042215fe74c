"""Exception types shared across the package.

Every error raised on a contract violation derives from :class:`EnkbfError`,
so callers (and the CLI) can distinguish "you called this wrong" from genuine
numerical trouble with a single except clause.
"""

from __future__ import annotations

__all__ = [
    "EnkbfError",
    "DimensionMismatch",
    "NotSymmetric",
    "Singular",
    "NotPSD",
    "BadLength",
    "TooFewParticles",
    "LevelMismatch",
    "BadEpsilon",
    "PlanPathMismatch",
    "TooFewPoints",
    "NonPositive",
    "BadConfig",
    "AssumptionWarning",
]


class EnkbfError(Exception):
    """Base class for all contract violations raised by this package."""


class DimensionMismatch(EnkbfError):
    """Array shapes are inconsistent with each other or with the model."""


class NotSymmetric(EnkbfError):
    """A matrix required to be symmetric is not (beyond tolerance)."""

    def __init__(self, name: str, max_asym: float | None = None):
        self.name = name
        msg = f"{name} is not symmetric"
        if max_asym is not None:
            msg += f" (max |M - M^T| element = {max_asym:.3e})"
        super().__init__(msg)


class Singular(EnkbfError):
    """A matrix required to be invertible is numerically singular."""

    def __init__(self, name: str, min_sv: float | None = None):
        self.name = name
        msg = f"{name} is numerically singular"
        if min_sv is not None:
            msg += f" (min singular value = {min_sv:.3e})"
        super().__init__(msg)


class NotPSD(EnkbfError):
    """A matrix required to be positive semi-definite has a clearly negative eigenvalue."""

    def __init__(self, name: str, min_eig: float | None = None):
        self.name = name
        msg = f"{name} is not positive semi-definite"
        if min_eig is not None:
            msg += f" (min eigenvalue = {min_eig:.3e})"
        super().__init__(msg)


class BadLength(EnkbfError):
    """An increment array has a length incompatible with the requested level move."""


class TooFewParticles(EnkbfError):
    """Ensemble operations need at least two particles (unbiased covariance)."""


class LevelMismatch(EnkbfError):
    """Discretization levels of two objects (or a query) are inconsistent."""


class BadEpsilon(EnkbfError):
    """Target accuracy must lie strictly in (0, 1)."""


class PlanPathMismatch(EnkbfError):
    """A level plan requires a finer observation path than the one supplied."""


class TooFewPoints(EnkbfError):
    """A rate fit needs at least two points."""


class NonPositive(EnkbfError):
    """Log-log fitting (or a positive parameter) received a non-positive value."""


class BadConfig(EnkbfError):
    """A JSON config is missing keys or holds values of the wrong kind."""


class AssumptionWarning(UserWarning):
    """Diagnostic: a model assumption (stability, bounded Riccati) looks violated.

    These are warnings, not errors -- the recursions are well defined either
    way, but the convergence rates backing the benchmark are no longer
    guaranteed.
    """
