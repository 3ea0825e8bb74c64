"""Exception types shared across the toolkit.

Each maps to one CLI exit code: config/argument problems exit 2, missing
input files exit 3, internal invariant violations exit 4.
"""


class LandsenseError(Exception):
    """Base class for all toolkit errors."""


class InvalidSpec(LandsenseError):
    """A scene/deployment/experiment specification is not satisfiable."""


class InvalidArgument(LandsenseError):
    """An operation was called with out-of-contract arguments."""


class PlacementFailure(LandsenseError):
    """Requested more base stations than the scene can hold."""


class MissingCategory(LandsenseError):
    """A landscape category required by the caller is absent from the scene."""


class OutOfBounds(LandsenseError):
    """A position lies outside the scene footprint."""


class DecodeFailure(LandsenseError):
    """A serialized artifact is corrupt or has an unsupported version."""


class MissingInput(LandsenseError):
    """A referenced input file does not exist."""


class InternalError(LandsenseError):
    """An internal invariant was violated; indicates a bug, not user error."""
