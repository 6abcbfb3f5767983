"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class DocforgeError(Exception):
    """Base class for all library errors."""


# --- gateway ---------------------------------------------------------------

class GatewayError(DocforgeError):
    pass


class GatewayTimeout(GatewayError):
    pass


class ProviderError(GatewayError):
    def __init__(self, status: int, body_excerpt: str = ""):
        super().__init__(f"provider returned status {status}: {body_excerpt[:200]}")
        self.status = status
        self.body_excerpt = body_excerpt[:200]


class ExhaustedRetries(GatewayError):
    def __init__(self, attempts: int, last_error: Exception | None = None):
        super().__init__(f"gave up after {attempts} attempts: {last_error}")
        self.attempts = attempts
        self.last_error = last_error


class MissingBinding(GatewayError):
    def __init__(self, name: str):
        super().__init__(f"no binding for placeholder {{{{{name}}}}}")
        self.name = name


class TemplateNotFound(GatewayError):
    pass


# --- planner ---------------------------------------------------------------

class PlanningFailed(DocforgeError):
    pass


class PlanLocked(DocforgeError):
    pass


class OutOfBounds(DocforgeError):
    pass


class DuplicateTitle(DocforgeError):
    pass


class InvalidEdit(DocforgeError):
    pass


class EmptyPlan(DocforgeError):
    pass


class AlreadyApproved(DocforgeError):
    pass


# --- memory ----------------------------------------------------------------

class EmptyText(DocforgeError):
    pass


class EmbeddingError(DocforgeError):
    pass


class DimensionMismatch(DocforgeError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"index dimension is {expected}, entry has {got}")
        self.expected = expected
        self.got = got


# --- section engine --------------------------------------------------------

class GenerationFailed(DocforgeError):
    pass


class PipelineError(DocforgeError):
    """A section (or chunk) failed; carries the failing index."""

    def __init__(self, section_index: int, reason: str):
        super().__init__(f"section {section_index}: {reason}")
        self.section_index = section_index
        self.reason = reason


# --- deid ------------------------------------------------------------------

class SpanOutOfRange(DocforgeError):
    pass


class DetectorUnavailable(DocforgeError):
    pass


# --- metrics ---------------------------------------------------------------

class EmptyReferences(DocforgeError):
    pass


# --- judge -----------------------------------------------------------------

class UnparseableScore(DocforgeError):
    pass


class OutOfRange(DocforgeError):
    pass


class AllCasesFailed(DocforgeError):
    pass


# --- agreement -------------------------------------------------------------

class MissingCells(DocforgeError):
    pass


class NoPairableValues(DocforgeError):
    pass


class ZeroVarianceRater(DocforgeError):
    def __init__(self, rater: int | str):
        super().__init__(f"rater {rater} has zero variance")
        self.rater = rater


class DegenerateAgreement(DocforgeError):
    pass


class ZeroVariance(DocforgeError):
    pass


# --- corpus ----------------------------------------------------------------

class Unreadable(DocforgeError):
    pass


class DuplicateId(DocforgeError):
    pass


# --- service ---------------------------------------------------------------

class IllegalTransition(DocforgeError):
    pass


class RevisionMismatch(DocforgeError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"expected revision {expected}, plan is at {actual}")
        self.expected = expected
        self.actual = actual


class UnknownJob(DocforgeError):
    pass


class WrongState(DocforgeError):
    pass
