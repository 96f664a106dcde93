"""Request bodies for the HTTP API.

Responses are the canonical record documents (see core.serialization), so
only the inbound shapes need pydantic models. Timestamps on the wire are UTC
integer microseconds, matching the documents they end up next to.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from fedflow.core.records import ResourceCapacity, ResourceSpec
from fedflow.core.serialization import us_to_ts
from fedflow.core.states import JobState
from fedflow.service.core import BatchJobUpdate, ItemUpdate, JobDraft, JobUpdate


class LoginRequest(BaseModel):
    username: str
    password: str


class SiteCreateRequest(BaseModel):
    hostname: str
    path: str


class ParamSpecModel(BaseModel):
    required: bool = True
    default: str | None = None


class TransferSlotModel(BaseModel):
    direction: str
    required: bool = True
    local_path: str = ""
    recursive: bool = False


class AppDraftModel(BaseModel):
    name: str
    command_template: str
    parameters: dict[str, ParamSpecModel] = Field(default_factory=dict)
    transfer_slots: dict[str, TransferSlotModel] = Field(default_factory=dict)
    environment: dict[str, str] = Field(default_factory=dict)
    cleanup_files: list[str] = Field(default_factory=list)


class AppSyncRequest(BaseModel):
    apps: list[AppDraftModel]


class ResourceSpecModel(BaseModel):
    num_nodes: int = 1
    ranks_per_node: int = 1
    threads_per_rank: int = 1
    gpus_per_rank: float = 0.0
    node_packing_count: int = 1
    wall_time_limit: int = 0

    def to_record(self) -> ResourceSpec:
        return ResourceSpec(
            num_nodes=self.num_nodes,
            ranks_per_node=self.ranks_per_node,
            threads_per_rank=self.threads_per_rank,
            gpus_per_rank=self.gpus_per_rank,
            node_packing_count=self.node_packing_count,
            wall_time_limit=self.wall_time_limit,
        )


class JobDraftModel(BaseModel):
    app_id: int
    workdir: str
    parameters: dict[str, str] = Field(default_factory=dict)
    resources: ResourceSpecModel = Field(default_factory=ResourceSpecModel)
    tags: dict[str, str] = Field(default_factory=dict)
    parent_ids: list[int] = Field(default_factory=list)
    parent_refs: list[int] = Field(default_factory=list)
    transfer_bindings: dict[str, str] = Field(default_factory=dict)

    def to_draft(self) -> JobDraft:
        return JobDraft(
            app_id=self.app_id,
            workdir=self.workdir,
            parameters=dict(self.parameters),
            resources=self.resources.to_record(),
            tags=dict(self.tags),
            parent_ids=tuple(self.parent_ids),
            parent_refs=tuple(self.parent_refs),
            transfer_bindings=dict(self.transfer_bindings),
        )


class JobCreateRequest(BaseModel):
    jobs: list[JobDraftModel]


class JobUpdateModel(BaseModel):
    job_id: int
    to_state: JobState
    timestamp: int  # microseconds
    data: dict = Field(default_factory=dict)

    def to_update(self) -> JobUpdate:
        return JobUpdate(
            job_id=self.job_id,
            to_state=self.to_state,
            timestamp=us_to_ts(self.timestamp),
            data=dict(self.data),
        )


class JobPatchRequest(BaseModel):
    updates: list[JobUpdateModel]


class BatchJobCreateRequest(BaseModel):
    site_id: int
    num_nodes: int
    wall_time: int
    queue: str = "default"
    project: str = "default"
    job_mode: str = "per-task-spawn"


class BatchJobUpdateModel(BaseModel):
    batchjob_id: int
    state: str | None = None
    scheduler_id: str | None = None

    def to_update(self) -> BatchJobUpdate:
        from fedflow.core.records import BatchJobState

        return BatchJobUpdate(
            batchjob_id=self.batchjob_id,
            state=BatchJobState(self.state) if self.state is not None else None,
            scheduler_id=self.scheduler_id,
        )


class BatchJobPatchRequest(BaseModel):
    updates: list[BatchJobUpdateModel]


class SessionCreateRequest(BaseModel):
    site_id: int
    batchjob_id: int | None = None


class CapacityModel(BaseModel):
    num_nodes: float
    cores_per_node: int = 0
    gpus_per_node: float = 0.0

    def to_record(self) -> ResourceCapacity:
        return ResourceCapacity(
            num_nodes=self.num_nodes,
            cores_per_node=self.cores_per_node,
            gpus_per_node=self.gpus_per_node,
        )


class AcquireRequest(BaseModel):
    max_num_jobs: int
    available: CapacityModel
    acquirable_states: list[JobState] = Field(
        default_factory=lambda: [JobState.RESTART_READY, JobState.STAGED_IN]
    )


class ItemUpdateModel(BaseModel):
    item_id: int
    state: str
    task_ref: str | None = None
    bytes: int | None = None

    def to_update(self) -> ItemUpdate:
        from fedflow.core.records import TransferState

        return ItemUpdate(
            item_id=self.item_id,
            state=TransferState(self.state),
            task_ref=self.task_ref,
            bytes=self.bytes,
        )


class TransferPatchRequest(BaseModel):
    updates: list[ItemUpdateModel]
