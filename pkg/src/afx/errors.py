"""Exception hierarchy shared by every stage of the pipeline."""


class AfxError(Exception):
    """Base class for all errors raised by afx."""


class FormatError(AfxError):
    pass


class UnsupportedDatatypeError(FormatError):
    pass


class GeometryError(AfxError):
    pass


class SchemaError(AfxError):
    pass


class VolumeWriteError(AfxError):
    pass


class InputError(AfxError):
    pass


class TopologyError(AfxError):
    pass


class AnalysisError(AfxError):
    pass


class ZoneError(AnalysisError):
    pass


class SpecError(AfxError):
    """A phantom specification violates its invariants."""


class StageError(AfxError):
    """Wraps an upstream error with the name of the pipeline stage that raised it."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
