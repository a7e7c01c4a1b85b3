"""Exception hierarchy shared across the package.

Every domain failure raises a subclass of :class:`NotefieldError` so the CLI
and HTTP layers can map them to exit code 2 / status 4xx uniformly.
"""


class NotefieldError(Exception):
    """Base class for all domain errors."""


class ParseError(NotefieldError):
    """A file or document could not be parsed under its declared format."""


class ShapeError(NotefieldError):
    """A grid has ragged rows or the wrong number of voices."""


class RangeError(NotefieldError):
    """A pitch left the representable MIDI range [0, 127]."""


class EmptyBeatError(NotefieldError):
    """A beat has no sounding note and the rest symbol is not enabled."""


class ResolutionError(NotefieldError):
    """A note onset falls between metrical bins."""


class ScopeError(NotefieldError):
    """A feature offset exceeds the model scope."""


class ZeroFeatureError(NotefieldError):
    """Feature (k=0, i=j, a!=b) is identically zero and excluded."""


class ValidationError(NotefieldError):
    """An object violates a structural invariant."""


class VersionError(NotefieldError):
    """A serialized file does not match the supported schema version."""


class TooLargeError(NotefieldError):
    """Exhaustive enumeration was requested beyond the desk-scale guard."""


class EmptyDatasetError(NotefieldError):
    """No piece is long enough to yield a single interior training sample."""


class DivergenceError(NotefieldError):
    """The optimizer's accepted objective increased repeatedly."""


class FullyPinnedError(NotefieldError):
    """Every cell is pinned; there is nothing to sample."""


class ConfigError(NotefieldError):
    """A configuration value is inconsistent or out of range."""


class EmptyReferenceError(NotefieldError):
    """The test-only chord set is empty; discovery is undefined."""


class MissingModelError(NotefieldError):
    """No trained model is available for a requested key or mode."""


class AlphabetError(NotefieldError):
    """A symbol is not a member of the relevant voice alphabet."""
