"""Record types shared by the service, agents, launchers, and simulator.

Integer ids are assigned by the service store in creation order, which also
serves as the stable query ordering. Timestamps are float seconds; the wire
format converts to integer microseconds (see serialization).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from fedflow.core.errors import InvalidResourceSpec
from fedflow.core.states import JobState


class TransferState(str, Enum):
    PENDING = "PENDING"
    ACTIVE = "ACTIVE"
    DONE = "DONE"
    ERROR = "ERROR"

    def __str__(self) -> str:
        return self.value


class BatchJobState(str, Enum):
    PENDING_SUBMISSION = "PENDING_SUBMISSION"
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    PENDING_DELETION = "PENDING_DELETION"
    FINISHED = "FINISHED"
    FAILED = "FAILED"

    def __str__(self) -> str:
        return self.value


#: Legal BatchJob edges: the submit/run chain, pre-run deletion, rejection.
BATCHJOB_TRANSITIONS: frozenset[tuple[BatchJobState, BatchJobState]] = frozenset(
    {
        (BatchJobState.PENDING_SUBMISSION, BatchJobState.QUEUED),
        (BatchJobState.PENDING_SUBMISSION, BatchJobState.PENDING_DELETION),
        (BatchJobState.PENDING_SUBMISSION, BatchJobState.FAILED),
        (BatchJobState.QUEUED, BatchJobState.RUNNING),
        (BatchJobState.QUEUED, BatchJobState.PENDING_DELETION),
        (BatchJobState.RUNNING, BatchJobState.FINISHED),
        (BatchJobState.RUNNING, BatchJobState.FAILED),
        (BatchJobState.PENDING_DELETION, BatchJobState.FINISHED),
    }
)


@dataclass(frozen=True, slots=True)
class UserRecord:
    user_id: int
    username: str
    password_salt: str
    password_hash: str


@dataclass(slots=True)
class SiteRecord:
    site_id: int
    owner: int
    hostname: str
    path: str
    last_refresh: float


@dataclass(frozen=True, slots=True)
class ParamSpec:
    required: bool = True
    default: str | None = None


@dataclass(frozen=True, slots=True)
class TransferSlot:
    direction: str  # "in" | "out"
    required: bool = True
    local_path: str = ""
    recursive: bool = False


@dataclass(frozen=True, slots=True)
class AppSpec:
    app_id: int
    site_id: int
    name: str
    command_template: str
    parameters: dict[str, ParamSpec] = field(default_factory=dict)
    transfer_slots: dict[str, TransferSlot] = field(default_factory=dict)
    environment: dict[str, str] = field(default_factory=dict)
    cleanup_files: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class ResourceSpec:
    num_nodes: int = 1
    ranks_per_node: int = 1
    threads_per_rank: int = 1
    gpus_per_rank: float = 0.0
    node_packing_count: int = 1
    wall_time_limit: int = 0  # minutes; 0 means no per-job limit

    def validate(self) -> "ResourceSpec":
        if self.num_nodes < 1:
            raise InvalidResourceSpec("num_nodes must be >= 1")
        if self.ranks_per_node < 1 or self.threads_per_rank < 1:
            raise InvalidResourceSpec("ranks_per_node and threads_per_rank must be >= 1")
        if self.gpus_per_rank < 0:
            raise InvalidResourceSpec("gpus_per_rank must be >= 0")
        if self.node_packing_count < 1:
            raise InvalidResourceSpec("node_packing_count must be >= 1")
        if self.node_packing_count > 1 and self.num_nodes != 1:
            raise InvalidResourceSpec("node packing applies only to single-node jobs")
        if self.wall_time_limit < 0:
            raise InvalidResourceSpec("wall_time_limit must be >= 0")
        return self

    def cores_per_node_needed(self) -> int:
        return self.ranks_per_node * self.threads_per_rank

    def gpus_per_node_needed(self) -> float:
        return self.ranks_per_node * self.gpus_per_rank


@dataclass(frozen=True, slots=True)
class ResourceCapacity:
    """Idle capacity a launcher advertises when asking for work."""

    num_nodes: float = 0.0
    cores_per_node: int = 1
    gpus_per_node: float = 0.0


@dataclass(slots=True)
class JobRecord:
    job_id: int
    app_id: int
    workdir: str
    parameters: dict[str, str] = field(default_factory=dict)
    resources: ResourceSpec = field(default_factory=ResourceSpec)
    tags: dict[str, str] = field(default_factory=dict)
    parent_ids: tuple[int, ...] = ()
    state: JobState = JobState.CREATED
    retry_count: int = 0
    transfer_bindings: dict[str, str] = field(default_factory=dict)
    session_id: int | None = None
    # Internal bookkeeping, persisted but not part of the wire document.
    readiness_time: float | None = None
    last_event_time: float | None = None


@dataclass(slots=True)
class TransferItemRecord:
    item_id: int
    job_id: int
    slot: str
    direction: str
    local_path: str
    remote_uri: str
    state: TransferState = TransferState.PENDING
    task_ref: str | None = None
    bytes: int = 0
    attempts: int = 0
    recursive: bool = False


@dataclass(slots=True)
class BatchJobRecord:
    batchjob_id: int
    site_id: int
    num_nodes: int
    wall_time: int  # minutes
    queue: str = "default"
    project: str = "default"
    job_mode: str = "per-task-spawn"  # or "node-resident"
    scheduler_id: str | None = None
    state: BatchJobState = BatchJobState.PENDING_SUBMISSION
    queued_at: float | None = None


@dataclass(slots=True)
class SessionRecord:
    session_id: int
    site_id: int
    batchjob_id: int | None
    heartbeat: float
    acquired_job_ids: list[int] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class EventRecord:
    event_id: int
    job_id: int
    from_state: JobState
    to_state: JobState
    timestamp: float
    data: dict = field(default_factory=dict)
