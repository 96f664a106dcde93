"""Shared exception types.

Every error carries a stable machine-readable ``code`` and an HTTP status so
the API layer can map exceptions to wire errors without a translation table.
"""

from __future__ import annotations


class FedflowError(Exception):
    """Base class for all domain and service errors."""

    code = "error"
    http_status = 400

    def __init__(self, message: str, detail: dict | None = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}

    def to_wire(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}


# ---- core model -----------------------------------------------------------


class MissingParameter(FedflowError):
    code = "missing_parameter"


class UnknownParameter(FedflowError):
    code = "unknown_parameter"


class InvalidAppSpec(FedflowError):
    code = "invalid_app_spec"


class MissingRequiredSlot(FedflowError):
    code = "missing_required_slot"


class UnknownSlot(FedflowError):
    code = "unknown_slot"


class InvalidTransition(FedflowError):
    code = "invalid_transition"
    http_status = 409


class NonMonotonicTimestamp(FedflowError):
    code = "non_monotonic_timestamp"
    http_status = 409


class InvalidResourceSpec(FedflowError):
    code = "invalid_resource_spec"


# ---- service --------------------------------------------------------------


class AuthFailed(FedflowError):
    code = "auth_failed"
    http_status = 401


class NotFound(FedflowError):
    code = "not_found"
    http_status = 404


class ForeignSite(FedflowError):
    code = "foreign_site"
    http_status = 403


class UnknownApp(NotFound):
    code = "unknown_app"


class UnknownSession(NotFound):
    code = "unknown_session"


class SessionExpired(FedflowError):
    code = "session_expired"
    http_status = 409


class CyclicDependency(FedflowError):
    code = "cyclic_dependency"


class InvalidBatchJobTransition(FedflowError):
    code = "invalid_batchjob_transition"
    http_status = 409


class InvalidItemState(FedflowError):
    code = "invalid_item_state"
    http_status = 409


class InvalidFilter(FedflowError):
    code = "invalid_filter"


class InvalidRequest(FedflowError):
    code = "invalid_request"


class DuplicateSite(FedflowError):
    code = "duplicate_site"
    http_status = 409


class DuplicateUser(FedflowError):
    code = "duplicate_user"
    http_status = 409


# ---- site agent / launcher --------------------------------------------------


class UntrustedEndpoint(FedflowError):
    code = "untrusted_endpoint"


class TransferBackendUnavailable(FedflowError):
    code = "transfer_backend_unavailable"
    http_status = 503


class SchedulerUnavailable(FedflowError):
    code = "scheduler_unavailable"
    http_status = 503


class SubmissionRejected(FedflowError):
    code = "submission_rejected"


class SpawnFailure(FedflowError):
    code = "spawn_failure"


# ---- client ----------------------------------------------------------------


class ApiError(FedflowError):
    """Raised by the SDK when the service returns an error document."""

    code = "api_error"

    def __init__(self, status: int, code: str, message: str, detail: dict | None = None):
        super().__init__(message, detail)
        self.http_status = status
        self.code = code


class BackendUnavailable(FedflowError):
    code = "backend_unavailable"
    http_status = 503


# ---- metrics / sim ----------------------------------------------------------


class EmptyWindow(FedflowError):
    code = "empty_window"


class ConfigError(FedflowError):
    code = "config_error"
