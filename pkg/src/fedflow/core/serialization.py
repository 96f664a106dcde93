"""Canonical document form for every record type.

One JSON object per record: scalar leaves, one level of map nesting for
map-typed fields, timestamps as UTC integer microseconds since the epoch,
keys sorted when dumped. The service wire format, the write-ahead log, and
event-log files all use these documents verbatim, so a record round-trips
byte-identically everywhere.
"""

from __future__ import annotations

import json
from typing import Any

from fedflow.core.records import (
    AppSpec,
    BatchJobRecord,
    BatchJobState,
    EventRecord,
    JobRecord,
    ParamSpec,
    ResourceSpec,
    SessionRecord,
    SiteRecord,
    TransferItemRecord,
    TransferSlot,
    TransferState,
    UserRecord,
)
from fedflow.core.states import JobState


def ts_to_us(t: float | None) -> int | None:
    return None if t is None else int(round(t * 1_000_000))


def us_to_ts(us: int | None) -> float | None:
    return None if us is None else us / 1_000_000


def dump_doc(doc: dict) -> str:
    """Stable single-line JSON encoding (sorted keys, no whitespace)."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


# ---- ResourceSpec -----------------------------------------------------------


def resource_spec_to_doc(spec: ResourceSpec) -> dict:
    return {
        "num_nodes": spec.num_nodes,
        "ranks_per_node": spec.ranks_per_node,
        "threads_per_rank": spec.threads_per_rank,
        "gpus_per_rank": spec.gpus_per_rank,
        "node_packing_count": spec.node_packing_count,
        "wall_time_limit": spec.wall_time_limit,
    }


def resource_spec_from_doc(doc: dict) -> ResourceSpec:
    return ResourceSpec(
        num_nodes=int(doc.get("num_nodes", 1)),
        ranks_per_node=int(doc.get("ranks_per_node", 1)),
        threads_per_rank=int(doc.get("threads_per_rank", 1)),
        gpus_per_rank=float(doc.get("gpus_per_rank", 0.0)),
        node_packing_count=int(doc.get("node_packing_count", 1)),
        wall_time_limit=int(doc.get("wall_time_limit", 0)),
    ).validate()


# ---- users (write-ahead log only; never on the wire) ------------------------


def user_to_doc(user: UserRecord) -> dict:
    return {
        "user_id": user.user_id,
        "username": user.username,
        "password_salt": user.password_salt,
        "password_hash": user.password_hash,
    }


def user_from_doc(doc: dict) -> UserRecord:
    return UserRecord(
        user_id=doc["user_id"],
        username=doc["username"],
        password_salt=doc["password_salt"],
        password_hash=doc["password_hash"],
    )


# ---- sites -------------------------------------------------------------------


def site_to_doc(site: SiteRecord) -> dict:
    return {
        "site_id": site.site_id,
        "owner": site.owner,
        "hostname": site.hostname,
        "path": site.path,
        "last_refresh": ts_to_us(site.last_refresh),
    }


def site_from_doc(doc: dict) -> SiteRecord:
    return SiteRecord(
        site_id=doc["site_id"],
        owner=doc["owner"],
        hostname=doc["hostname"],
        path=doc["path"],
        last_refresh=us_to_ts(doc["last_refresh"]),
    )


# ---- apps --------------------------------------------------------------------


def app_to_doc(app: AppSpec) -> dict:
    return {
        "app_id": app.app_id,
        "site_id": app.site_id,
        "name": app.name,
        "command_template": app.command_template,
        "parameters": {
            name: {"required": p.required, "default": p.default}
            for name, p in app.parameters.items()
        },
        "transfer_slots": {
            name: {
                "direction": s.direction,
                "required": s.required,
                "local_path": s.local_path,
                "recursive": s.recursive,
            }
            for name, s in app.transfer_slots.items()
        },
        "environment": dict(app.environment),
        "cleanup_files": list(app.cleanup_files),
    }


def app_from_doc(doc: dict) -> AppSpec:
    return AppSpec(
        app_id=doc["app_id"],
        site_id=doc["site_id"],
        name=doc["name"],
        command_template=doc["command_template"],
        parameters={
            name: ParamSpec(required=bool(p.get("required", True)), default=p.get("default"))
            for name, p in doc.get("parameters", {}).items()
        },
        transfer_slots={
            name: TransferSlot(
                direction=s["direction"],
                required=bool(s.get("required", True)),
                local_path=s.get("local_path", ""),
                recursive=bool(s.get("recursive", False)),
            )
            for name, s in doc.get("transfer_slots", {}).items()
        },
        environment=dict(doc.get("environment", {})),
        cleanup_files=tuple(doc.get("cleanup_files", ())),
    )


# ---- jobs --------------------------------------------------------------------


def job_to_doc(job: JobRecord, internal: bool = False) -> dict:
    doc = {
        "job_id": job.job_id,
        "app_id": job.app_id,
        "workdir": job.workdir,
        "parameters": dict(job.parameters),
        "resources": resource_spec_to_doc(job.resources),
        "tags": dict(job.tags),
        "parent_ids": list(job.parent_ids),
        "state": str(job.state),
        "retry_count": job.retry_count,
        "transfer_bindings": dict(job.transfer_bindings),
        "session_id": job.session_id,
    }
    if internal:
        doc["readiness_time"] = ts_to_us(job.readiness_time)
        doc["last_event_time"] = ts_to_us(job.last_event_time)
    return doc


def job_from_doc(doc: dict) -> JobRecord:
    return JobRecord(
        job_id=doc["job_id"],
        app_id=doc["app_id"],
        workdir=doc["workdir"],
        parameters=dict(doc.get("parameters", {})),
        resources=resource_spec_from_doc(doc.get("resources", {})),
        tags=dict(doc.get("tags", {})),
        parent_ids=tuple(doc.get("parent_ids", ())),
        state=JobState(doc["state"]),
        retry_count=int(doc.get("retry_count", 0)),
        transfer_bindings=dict(doc.get("transfer_bindings", {})),
        session_id=doc.get("session_id"),
        readiness_time=us_to_ts(doc.get("readiness_time")),
        last_event_time=us_to_ts(doc.get("last_event_time")),
    )


# ---- transfer items ----------------------------------------------------------


def item_to_doc(item: TransferItemRecord) -> dict:
    return {
        "item_id": item.item_id,
        "job_id": item.job_id,
        "slot": item.slot,
        "direction": item.direction,
        "local_path": item.local_path,
        "remote_uri": item.remote_uri,
        "state": str(item.state),
        "task_ref": item.task_ref,
        "bytes": item.bytes,
        "attempts": item.attempts,
        "recursive": item.recursive,
    }


def item_from_doc(doc: dict) -> TransferItemRecord:
    return TransferItemRecord(
        item_id=doc["item_id"],
        job_id=doc["job_id"],
        slot=doc["slot"],
        direction=doc["direction"],
        local_path=doc["local_path"],
        remote_uri=doc["remote_uri"],
        state=TransferState(doc["state"]),
        task_ref=doc.get("task_ref"),
        bytes=int(doc.get("bytes", 0)),
        attempts=int(doc.get("attempts", 0)),
        recursive=bool(doc.get("recursive", False)),
    )


# ---- batch jobs ---------------------------------------------------------------


def batchjob_to_doc(bj: BatchJobRecord, internal: bool = False) -> dict:
    doc = {
        "batchjob_id": bj.batchjob_id,
        "site_id": bj.site_id,
        "num_nodes": bj.num_nodes,
        "wall_time": bj.wall_time,
        "queue": bj.queue,
        "project": bj.project,
        "job_mode": bj.job_mode,
        "scheduler_id": bj.scheduler_id,
        "state": str(bj.state),
    }
    if internal:
        doc["queued_at"] = ts_to_us(bj.queued_at)
    return doc


def batchjob_from_doc(doc: dict) -> BatchJobRecord:
    return BatchJobRecord(
        batchjob_id=doc["batchjob_id"],
        site_id=doc["site_id"],
        num_nodes=int(doc["num_nodes"]),
        wall_time=int(doc["wall_time"]),
        queue=doc.get("queue", "default"),
        project=doc.get("project", "default"),
        job_mode=doc.get("job_mode", "per-task-spawn"),
        scheduler_id=doc.get("scheduler_id"),
        state=BatchJobState(doc["state"]),
        queued_at=us_to_ts(doc.get("queued_at")),
    )


# ---- sessions ------------------------------------------------------------------


def session_to_doc(session: SessionRecord) -> dict:
    return {
        "session_id": session.session_id,
        "site_id": session.site_id,
        "batchjob_id": session.batchjob_id,
        "heartbeat": ts_to_us(session.heartbeat),
        "acquired_job_ids": list(session.acquired_job_ids),
    }


def session_from_doc(doc: dict) -> SessionRecord:
    return SessionRecord(
        session_id=doc["session_id"],
        site_id=doc["site_id"],
        batchjob_id=doc.get("batchjob_id"),
        heartbeat=us_to_ts(doc["heartbeat"]),
        acquired_job_ids=list(doc.get("acquired_job_ids", [])),
    )


# ---- events --------------------------------------------------------------------


def event_to_doc(event: EventRecord) -> dict:
    return {
        "event_id": event.event_id,
        "job_id": event.job_id,
        "from_state": str(event.from_state),
        "to_state": str(event.to_state),
        "timestamp": ts_to_us(event.timestamp),
        "data": _scrub_data(event.data),
    }


def event_from_doc(doc: dict) -> EventRecord:
    return EventRecord(
        event_id=doc["event_id"],
        job_id=doc["job_id"],
        from_state=JobState(doc["from_state"]),
        to_state=JobState(doc["to_state"]),
        timestamp=us_to_ts(doc["timestamp"]),
        data=dict(doc.get("data", {})),
    )


def _scrub_data(data: dict) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, (str, int, float, bool)) or value is None:
            out[str(key)] = value
        else:
            out[str(key)] = str(value)
    return out


#: Table registry used by the write-ahead log.
TABLE_CODECS = {
    "users": (user_to_doc, user_from_doc),
    "sites": (site_to_doc, site_from_doc),
    "apps": (app_to_doc, app_from_doc),
    "jobs": (lambda j: job_to_doc(j, internal=True), job_from_doc),
    "transfer_items": (item_to_doc, item_from_doc),
    "batch_jobs": (lambda b: batchjob_to_doc(b, internal=True), batchjob_from_doc),
    "sessions": (session_to_doc, session_from_doc),
}
