"""Exception hierarchy. Everything the CLI maps to exit code 2 derives from
:class:`EdcnetError`."""


class EdcnetError(Exception):
    pass


class FormatError(EdcnetError):
    """Bad magic bytes or unparsable header."""


class VersionError(EdcnetError):
    pass


class ShapeMismatchError(EdcnetError, ValueError):
    pass


class TruncatedFileError(EdcnetError):
    pass


class ManifestError(EdcnetError):
    """Manifest fails validation (e.g. overlapping splits)."""


class RoomGenerationError(EdcnetError):
    pass


class DomainError(EdcnetError, ValueError):
    pass


class DegenerateFitError(EdcnetError):
    pass


class NumericalError(EdcnetError):
    """A NaN or Inf appeared in a forward activation."""


class NonFiniteGradientError(EdcnetError):
    pass
