"""Pure domain model: states, records, templating, staging resolution.

No FastAPI/httpx/storage imports here; everything is plain dataclasses and
functions so the service, the launchers, and the simulator share one set of
rules.
"""

from fedflow.core.appspec import render_command, resolve_transfer_slots, validate_app_spec
from fedflow.core.records import (
    AppSpec,
    BatchJobRecord,
    BatchJobState,
    EventRecord,
    JobRecord,
    ParamSpec,
    ResourceCapacity,
    ResourceSpec,
    SessionRecord,
    SiteRecord,
    TransferItemRecord,
    TransferSlot,
    TransferState,
    UserRecord,
)
from fedflow.core.states import (
    ACQUIRABLE_STATES,
    JOB_TRANSITIONS,
    TERMINAL_STATES,
    JobState,
    apply_event,
    readiness_state,
    replay_events,
    validate_transition,
)

__all__ = [
    "ACQUIRABLE_STATES",
    "AppSpec",
    "BatchJobRecord",
    "BatchJobState",
    "EventRecord",
    "JOB_TRANSITIONS",
    "JobRecord",
    "JobState",
    "ParamSpec",
    "ResourceCapacity",
    "ResourceSpec",
    "SessionRecord",
    "SiteRecord",
    "TERMINAL_STATES",
    "TransferItemRecord",
    "TransferSlot",
    "TransferState",
    "UserRecord",
    "apply_event",
    "readiness_state",
    "render_command",
    "replay_events",
    "resolve_transfer_slots",
    "validate_app_spec",
    "validate_transition",
]
