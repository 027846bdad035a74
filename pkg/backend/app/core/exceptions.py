"""
CohortForge - Pipeline Errors

Two families map onto CLI exit codes: data validation problems (exit 1)
and I/O problems (exit 2).
"""
from typing import Any, Dict, Optional


class PipelineError(Exception):
    """Base error carrying structured context (stage, patient, row, ...)"""

    exit_code: int = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = {k: v for k, v in context.items() if v is not None}

    def with_context(self, **context: Any) -> "PipelineError":
        """Attach extra context (e.g. the stage name) and return self"""
        for key, value in context.items():
            if value is not None:
                self.context.setdefault(key, value)
        return self

    def __str__(self) -> str:
        if not self.context:
            return f"{type(self).__name__}: {self.message}"
        details = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
        return f"{type(self).__name__}: {self.message} ({details})"


class DataValidationError(PipelineError):
    exit_code = 1


class DataIOError(PipelineError):
    exit_code = 2


# Validation errors

class ParseError(DataValidationError):
    pass


class BadDate(DataValidationError):
    pass


class DuplicateReportId(DataValidationError):
    pass


class SchemaInvariantViolation(DataValidationError):
    pass


class SchemaMismatch(DataValidationError):
    pass


class OrphanRow(DataValidationError):
    pass


class MixedPatients(DataValidationError):
    pass


class UnknownPatient(DataValidationError):
    pass


class FutureBirthDate(DataValidationError):
    pass


class PatientMismatch(DataValidationError):
    pass


class MissingAge(DataValidationError):
    pass


class LengthMismatch(DataValidationError):
    pass


class ExcludedLabelPresent(DataValidationError):
    pass


class EmptyMatrix(DataValidationError):
    pass


class EmptyIntersection(DataValidationError):
    pass


class PatientSetMismatch(DataValidationError):
    pass


class SingleClassTrainingSet(DataValidationError):
    pass


class InvalidConfig(DataValidationError):
    pass


# I/O errors

class MissingFile(DataIOError):
    pass


class MissingTable(DataIOError):
    pass


class IoError(DataIOError):
    pass


def exit_code_for(exc: BaseException) -> Optional[int]:
    """Map an exception to a CLI exit code, None if it is not a data/IO problem"""
    if isinstance(exc, PipelineError):
        return exc.exit_code
    if isinstance(exc, OSError):
        return 2
    return None
