"""Exception hierarchy shared across the package."""

from __future__ import annotations


class RdHabitatError(Exception):
    """Base class for all package-specific errors."""


class EmptyResult(RdHabitatError):
    """No feasible solution exists for the requested computation."""


class NumericalFailure(RdHabitatError):
    """An iterative numerical procedure failed to converge."""


class Infeasible(RdHabitatError):
    """Preconditions of an analytical threshold are not satisfied."""


class NoSignChange(RdHabitatError):
    """A bracketed root search was given an invalid bracket."""


class NoBand(RdHabitatError):
    """No unstable wavenumber band exists for the given parameters."""


class PoleAtMode(RdHabitatError):
    """The mode-wise diffusion threshold has a pole at the requested mode."""


class DegenerateDomain(RdHabitatError):
    """A domain rectangle collapsed to zero area under grid snapping."""


class DisconnectedDomain(RdHabitatError):
    """The rasterized domain mask is not 4-connected."""


class ShapeMismatch(RdHabitatError):
    """A snapshot is incompatible with the target grid geometry."""


class EmptyRegion(RdHabitatError):
    """A spatial reduction was requested over a region with no cells."""


class RegionNotRectangular(RdHabitatError):
    """A spectral analysis was requested on a non-rectangular region."""


class ConfigError(RdHabitatError):
    """An experiment configuration could not be parsed or validated."""


class BlowUp(RdHabitatError):
    """The explicit integration produced non-finite or runaway values.

    Carries the simulation time of the failed step and, when available,
    the last valid field state for diagnostic output.
    """

    def __init__(self, message: str, t: float, state=None):
        super().__init__(message)
        self.t = t
        self.state = state
