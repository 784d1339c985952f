"""Exception types shared across the package."""


class BidsimError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(BidsimError):
    """Structural misuse: dimension or architecture mismatch, bad config value."""


class ValidationError(BidsimError):
    """A runtime value is outside its documented domain (e.g. offer above cap)."""


class StateError(BidsimError):
    """An operation was called out of order (e.g. backward before forward)."""


class NumericFailure(BidsimError):
    """A computation produced NaN/Inf; carries the layer that blew up."""

    def __init__(self, message, layer_name=None):
        super().__init__(message)
        self.layer_name = layer_name


class DegenerateBatchError(BidsimError):
    """Batch normalization in train mode received fewer than 2 rows."""


class ResourceGuardError(BidsimError):
    """A request would exceed a hard resource guard (e.g. oracle grid too fine)."""
