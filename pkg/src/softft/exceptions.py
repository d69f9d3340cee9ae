"""Exception and warning types raised across the toolkit."""


class SoftFTError(Exception):
    """Base class for all fatal toolkit errors."""


class AngleAtPi(SoftFTError):
    """Rotation angle is within tolerance of pi; the logarithm is not unique."""


class InvalidConfig(SoftFTError):
    pass


class SingularField(SoftFTError):
    """Field point is too close to a dipole source."""


class DegenerateSweep(SoftFTError):
    pass


class DegenerateConfiguration(SoftFTError):
    """Point correspondences do not determine a rigid pose."""


class RankDeficient(SoftFTError):
    pass


class CalibrationError(SoftFTError):
    """A per-record failure during calibration, tagged with the record index."""

    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f"record {index}: {type(cause).__name__}: {cause}")


class EmptyLog(SoftFTError):
    pass


class InsufficientSamples(SoftFTError):
    pass


class MalformedRow(SoftFTError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class SchemaMismatch(SoftFTError):
    pass


class RankDeficientWarning(UserWarning):
    """The flux matrix is badly conditioned; the fit is still returned."""
