"""Exception types raised by the toolkit."""


class DepthProbeError(Exception):
    """Base class for all toolkit errors."""


class FormatError(DepthProbeError, ValueError):
    """A file does not conform to its on-disk format."""


class ValidationError(DepthProbeError, ValueError):
    """Loaded data violates a structural invariant."""


class ConfigError(DepthProbeError, ValueError):
    """Invalid or inconsistent configuration."""


class NotFoundError(DepthProbeError, LookupError):
    """A requested instance, scene, or relation does not exist."""


class DegenerateError(DepthProbeError, ValueError):
    """An object or image has no valid depth pixels."""


class PolicyError(DepthProbeError, ValueError):
    """A request violates an experimental policy (e.g. masking a non-unique object)."""
