"""Exception types raised across the toolkit."""


class ContactFitError(Exception):
    """Base class for all toolkit errors."""


class NonManifoldError(ContactFitError):
    """Mesh has an edge with more than two faces, duplicated faces, or inconsistent winding."""


class DegenerateFaceError(ContactFitError):
    """Face with (near-)zero area."""


class TracingStuckError(ContactFitError):
    """Geodesic tracing hit an open boundary or could not make progress."""


class DisconnectedError(ContactFitError):
    """Two surface points lie in different connected components."""


class DegeneratePatchError(ContactFitError):
    """Contact patch too small or collapsed for axis synthesis."""


class DegenerateDirectionError(ContactFitError):
    """Click direction projects to (near-)zero length in the tangent plane."""


class DimensionMismatchError(ContactFitError):
    """Operands have incompatible dimensions."""


class UnknownPartError(ContactFitError):
    """Body part name not present in the model's part vocabulary."""


class OpenMeshError(ContactFitError):
    """Operation requires a closed mesh but a boundary edge exists."""


class BehindCameraError(ContactFitError):
    """Geometry lies entirely behind the camera plane."""


class EmptyCorrespondencesError(ContactFitError):
    """Correspondence set is empty."""


class DegenerateCorrespondencesError(ContactFitError):
    """Correspondence points are rank-deficient (collinear or coincident)."""


class NonFiniteLossError(ContactFitError):
    """A loss term evaluated to NaN or infinity."""


class EmptyStoreError(ContactFitError):
    """Query against an empty record store."""


class MissingCannedEntryError(ContactFitError):
    """Canned oracle file has no entry for the requested key."""


class MalformedAnswerError(ContactFitError):
    """Oracle reply violates the constrained answer format."""


class ParseError(ContactFitError):
    """File could not be parsed; carries location context.

    `where` is a line number for text formats and a byte offset for binary ones.
    """

    def __init__(self, message, where=None):
        self.where = where
        if where is not None:
            message = f"{message} (at {where})"
        super().__init__(message)


class SchemaVersionUnsupportedError(ContactFitError):
    """Document schema version not recognized."""


class DegenerateConfigurationError(ContactFitError):
    """Point configuration is rank-deficient for alignment."""


class FitStageError(ContactFitError):
    """Wraps an error raised inside a fitting stage with the stage identity."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage}: {cause}")
