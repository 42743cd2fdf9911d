"""Exception hierarchy shared by all fetril modules."""


class FetrilError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(FetrilError):
    """A binary feature file or manifest is malformed."""


class ConsistencyError(FetrilError):
    """Manifest and feature files disagree (dimensionality, counts, ids)."""


class DataError(FetrilError):
    """Feature data contains non-finite values."""


class ContractError(FetrilError):
    """An operation was called with arguments violating its preconditions."""


class ProtocolError(FetrilError):
    """The incremental protocol was violated (e.g. reading dropped features,
    generating pseudo-features with no new classes available)."""


class GeometryError(FetrilError):
    """Degenerate geometry, e.g. a zero-norm centroid in cosine ranking."""
