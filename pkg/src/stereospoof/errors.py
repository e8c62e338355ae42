"""Exception types shared across the package."""


class StereoSpoofError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(StereoSpoofError):
    """Input violates a documented precondition or schema."""


class DegenerateGeometryError(StereoSpoofError):
    """Geometric configuration admits no stable solution (parallel rays,
    collinear point sets, rank-deficient problems)."""


class StageError(StereoSpoofError):
    """A pipeline stage failed; carries the stage name and, when known,
    the offending sample index."""

    def __init__(self, stage: str, message: str, sample_index: int | None = None):
        self.stage = stage
        self.sample_index = sample_index
        where = stage if sample_index is None else f"{stage}[sample {sample_index}]"
        super().__init__(f"{where}: {message}")
