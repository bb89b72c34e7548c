"""Exception and warning types shared across the package."""
from __future__ import annotations


class SingularChannelError(ValueError):
    """Both longitudinal wavevectors vanish at an interface; the Fresnel
    problem is degenerate for this channel."""


class OutOfDomainError(ValueError):
    """Argument lies outside the physically meaningful domain."""


class InvalidApertureError(ValueError):
    """Numerical aperture exceeds the collection-side refractive index."""


class GeometryError(ValueError):
    """Geometry of the inputs is inconsistent: optical axis outside the
    image frame, emitter placed outside its host layer, or stacks whose
    layer structures do not line up."""


class MetadataError(ValueError):
    """Measurement metadata is missing required fields or fails validation."""


class IllConditionedFitError(ValueError):
    """Fit basis vectors are numerically collinear; weights are not
    identifiable from the data."""


class InsufficientDataError(ValueError):
    """Not enough detection events to form the requested statistic."""


class AccuracyWarning(UserWarning):
    """A numerical result did not converge to the requested accuracy
    (e.g. a truncated spatial-frequency integral with a significant tail)."""
