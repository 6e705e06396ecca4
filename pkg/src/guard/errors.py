"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class GuardError(Exception):
    """Base class for all engine errors."""


class PreconditionError(GuardError):
    """An operation was invoked with inputs that violate its contract."""


# --- taxonomy ---------------------------------------------------------------

class TaxonomyParseError(GuardError):
    """The taxonomy document could not be parsed."""


class TaxonomyValidationError(GuardError):
    """The taxonomy document parsed but violated a registry constraint."""

    def __init__(self, violations):
        self.violations = list(violations)
        first = self.violations[0] if self.violations else None
        detail = f"{first.constraint} ({first.entity_id})" if first else "unknown"
        super().__init__(f"taxonomy validation failed: {detail}")


class UnknownLensValueError(GuardError):
    """A lens query used a value outside the axis vocabulary."""


# --- inference gateway -------------------------------------------------------

class TemplateSlotError(GuardError):
    """Bindings do not cover a template's slots exactly."""

    def __init__(self, message: str, slot: str):
        self.slot = slot
        super().__init__(message)


class BackendError(GuardError):
    """Base class for backend transport failures."""


class BackendUnreachableError(BackendError):
    """The live backend could not be reached."""


class UnrecordedRequestError(BackendError):
    """A replay backend was asked for a request digest it has no entry for."""

    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"unrecorded request: {digest}")


class SchemaViolationError(GuardError):
    """Backend output failed schema validation after all repair retries."""

    def __init__(self, schema_id: str, last_raw_text: str, attempts: int, detail: str):
        self.schema_id = schema_id
        self.last_raw_text = last_raw_text
        self.attempts = attempts
        self.detail = detail
        super().__init__(
            f"output failed schema '{schema_id}' after {attempts} attempt(s): {detail}"
        )


# --- intake ------------------------------------------------------------------

class UnknownQuestionError(GuardError):
    """An answer referenced a question id absent from the questionnaire."""


class AnswerKindMismatchError(GuardError):
    """An answer value does not conform to its question's answer kind."""


# --- assessment core ---------------------------------------------------------

class MalformedFindingsError(GuardError):
    """Finding lists handed to compilation violate upstream invariants."""


class ScoreRangeError(GuardError):
    """A score fell outside the 1..25 range."""


# --- reporting ---------------------------------------------------------------

class CardinalityMismatchError(GuardError):
    """Register records and mitigation advices do not pair one-to-one."""


class UnsupportedFormatError(GuardError):
    """Requested report rendering format is not supported."""


class ReportParseError(GuardError):
    """Structured report bytes could not be parsed."""


class UnsupportedSchemaVersionError(ReportParseError):
    """Structured report declares a schema version this build cannot read."""

    def __init__(self, version: str):
        self.version = version
        super().__init__(f"unsupported report schema version: {version!r}")


# --- service -----------------------------------------------------------------

class UnknownSessionError(GuardError):
    """No session exists for the given id."""


class WrongSessionStateError(GuardError):
    """The session is not in a state that permits the operation."""

    def __init__(self, state: str, operation: str):
        self.state = state
        self.operation = operation
        super().__init__(f"cannot {operation} while session state is '{state}'")


class BelowThresholdError(PreconditionError):
    """Profile completeness is below the configured minimum and force is off."""

    def __init__(self, completeness: float, threshold: float):
        self.completeness = completeness
        self.threshold = threshold
        super().__init__(
            f"profile completeness {completeness:.2f} is below threshold "
            f"{threshold:.2f}; pass force to run anyway"
        )
