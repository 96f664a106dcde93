"""Typed API facade with two interchangeable backends.

DirectApi calls the service core in-process; HttpApi speaks the HTTP wire
format. Launchers, site agents, the CLI, and the simulator are all written
against this surface, so the same component code runs in both worlds.
"""

from __future__ import annotations

from typing import Iterable, Protocol

import httpx

from fedflow.core import serialization as ser
from fedflow.core.errors import ApiError, BackendUnavailable
from fedflow.core.records import (
    AppSpec,
    BatchJobRecord,
    BatchJobState,
    EventRecord,
    JobRecord,
    ResourceCapacity,
    SessionRecord,
    SiteRecord,
    TransferItemRecord,
    TransferState,
)
from fedflow.core.states import JobState
from fedflow.service.core import (
    BatchJobUpdate,
    ItemUpdate,
    JobDraft,
    JobUpdate,
    ServiceCore,
)


class Api(Protocol):
    def login(self, username: str, password: str) -> None: ...

    def register_site(self, hostname: str, path: str) -> SiteRecord: ...

    def list_sites(self) -> list[SiteRecord]: ...

    def sync_apps(self, site_id: int, drafts: list[dict]) -> list[AppSpec]: ...

    def list_apps(self, site_id: int | None = None) -> list[AppSpec]: ...

    def create_jobs(self, drafts: list[JobDraft]) -> list[JobRecord]: ...

    def query_jobs(
        self,
        state: JobState | None = None,
        tags: dict[str, str] | None = None,
        site_id: int | None = None,
        ids: list[int] | None = None,
        limit: int | None = None,
        offset: int = 0,
    ) -> list[JobRecord]: ...

    def update_jobs(self, updates: list[JobUpdate]) -> tuple[list[EventRecord], list[dict]]: ...

    def create_batch_job(
        self,
        site_id: int,
        num_nodes: int,
        wall_time: int,
        queue: str = "default",
        project: str = "default",
        job_mode: str = "per-task-spawn",
    ) -> BatchJobRecord: ...

    def list_batch_jobs(
        self,
        site_id: int | None = None,
        states: tuple[BatchJobState, ...] | None = None,
    ) -> list[BatchJobRecord]: ...

    def update_batch_jobs(self, updates: list[BatchJobUpdate]) -> list[BatchJobRecord]: ...

    def create_session(self, site_id: int, batchjob_id: int | None = None) -> SessionRecord: ...

    def acquire_jobs(
        self,
        session_id: int,
        max_num_jobs: int,
        available: ResourceCapacity,
        acquirable_states: tuple[JobState, ...] = (JobState.RESTART_READY, JobState.STAGED_IN),
    ) -> list[JobRecord]: ...

    def heartbeat(self, session_id: int) -> SessionRecord: ...

    def delete_session(self, session_id: int) -> list[int]: ...

    def list_transfer_items(
        self,
        site_id: int,
        state: TransferState | None = None,
        direction: str | None = None,
    ) -> list[TransferItemRecord]: ...

    def update_transfer_items(
        self, updates: list[ItemUpdate]
    ) -> tuple[list[TransferItemRecord], list[EventRecord], list[dict]]: ...

    def query_events(
        self,
        job_id: int | None = None,
        from_state: JobState | None = None,
        to_state: JobState | None = None,
        begin: float | None = None,
        end: float | None = None,
        tags: dict[str, str] | None = None,
        limit: int | None = None,
        offset: int = 0,
    ) -> list[EventRecord]: ...

    def backlog(self, site_id: int) -> dict: ...


def _wire_view(job: JobRecord) -> JobRecord:
    """Strip service-internal fields so both backends return the same shape."""
    job.readiness_time = None
    job.last_event_time = None
    return job


def _wire_batchjob(bj: BatchJobRecord) -> BatchJobRecord:
    bj.queued_at = None
    return bj


class DirectApi:
    """In-process backend: a thin authenticated binding to a ServiceCore."""

    def __init__(self, core: ServiceCore):
        self.core = core
        self._user_id: int | None = None

    def login(self, username: str, password: str) -> None:
        token, _ = self.core.login(username, password)
        self._user_id = self.core.authenticate(token)

    @property
    def user_id(self) -> int:
        if self._user_id is None:
            raise ApiError(401, "auth_failed", "login before calling the API")
        return self._user_id

    def register_site(self, hostname, path):
        return self.core.register_site(self.user_id, hostname, path)

    def list_sites(self):
        return self.core.list_sites(self.user_id)

    def sync_apps(self, site_id, drafts):
        return self.core.sync_apps(self.user_id, site_id, drafts)

    def list_apps(self, site_id=None):
        return self.core.list_apps(self.user_id, site_id)

    def create_jobs(self, drafts):
        return [_wire_view(j) for j in self.core.bulk_create_jobs(self.user_id, drafts)]

    def query_jobs(self, state=None, tags=None, site_id=None, ids=None, limit=None, offset=0):
        jobs = self.core.query_jobs(
            self.user_id, state=state, tags=tags, site_id=site_id, ids=ids,
            limit=limit, offset=offset,
        )
        return [_wire_view(j) for j in jobs]

    def update_jobs(self, updates):
        return self.core.bulk_update_jobs(self.user_id, updates)

    def create_batch_job(self, site_id, num_nodes, wall_time, queue="default",
                         project="default", job_mode="per-task-spawn"):
        return _wire_batchjob(self.core.create_batch_job(
            self.user_id, site_id, num_nodes, wall_time, queue, project, job_mode
        ))

    def list_batch_jobs(self, site_id=None, states=None):
        rows = self.core.list_batch_jobs(self.user_id, site_id=site_id, states=states)
        return [_wire_batchjob(b) for b in rows]

    def update_batch_jobs(self, updates):
        return [_wire_batchjob(b) for b in self.core.update_batch_jobs(self.user_id, updates)]

    def create_session(self, site_id, batchjob_id=None):
        self.core.expire_stale_sessions()
        return self.core.create_session(self.user_id, site_id, batchjob_id)

    def acquire_jobs(self, session_id, max_num_jobs, available,
                     acquirable_states=(JobState.RESTART_READY, JobState.STAGED_IN)):
        jobs = self.core.acquire_jobs(
            self.user_id, session_id, max_num_jobs, available, acquirable_states
        )
        return [_wire_view(j) for j in jobs]

    def heartbeat(self, session_id):
        return self.core.heartbeat(self.user_id, session_id)

    def delete_session(self, session_id):
        return self.core.delete_session(self.user_id, session_id)

    def list_transfer_items(self, site_id, state=None, direction=None):
        return self.core.list_transfer_items(self.user_id, site_id, state=state, direction=direction)

    def update_transfer_items(self, updates):
        return self.core.update_transfer_items(self.user_id, updates)

    def query_events(self, job_id=None, from_state=None, to_state=None, begin=None,
                     end=None, tags=None, limit=None, offset=0):
        return self.core.query_events(
            self.user_id, job_id=job_id, from_state=from_state, to_state=to_state,
            begin=begin, end=end, tags=tags, limit=limit, offset=offset,
        )

    def backlog(self, site_id):
        return self.core.backlog_summary(self.user_id, site_id)


def _draft_to_body(draft: JobDraft) -> dict:
    return {
        "app_id": draft.app_id,
        "workdir": draft.workdir,
        "parameters": dict(draft.parameters),
        "resources": ser.resource_spec_to_doc(draft.resources),
        "tags": dict(draft.tags),
        "parent_ids": list(draft.parent_ids),
        "parent_refs": list(draft.parent_refs),
        "transfer_bindings": dict(draft.transfer_bindings),
    }


class HttpApi:
    """HTTP backend for a running service."""

    def __init__(self, base_url: str, token: str | None = None,
                 http: httpx.Client | None = None, timeout: float = 30.0):
        self._http = http or httpx.Client(base_url=base_url, timeout=timeout)
        self.token = token

    def close(self) -> None:
        self._http.close()

    def _call(self, method: str, path: str, *, json: dict | None = None,
              params: dict | None = None) -> dict:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = self._http.request(method, path, json=json, params=params, headers=headers)
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"{method} {path}: {exc}") from exc
        if resp.status_code >= 400:
            try:
                doc = resp.json()
            except ValueError:
                doc = {"code": "error", "message": resp.text, "detail": {}}
            raise ApiError(resp.status_code, doc.get("code", "error"),
                           doc.get("message", ""), doc.get("detail"))
        return resp.json()

    def login(self, username: str, password: str) -> None:
        doc = self._call("POST", "/auth/login",
                         json={"username": username, "password": password})
        self.token = doc["token"]

    def register_site(self, hostname, path):
        return ser.site_from_doc(
            self._call("POST", "/sites", json={"hostname": hostname, "path": path})
        )

    def list_sites(self):
        return [ser.site_from_doc(d) for d in self._call("GET", "/sites")["sites"]]

    def sync_apps(self, site_id, drafts):
        doc = self._call("POST", f"/sites/{site_id}/apps", json={"apps": drafts})
        return [ser.app_from_doc(d) for d in doc["apps"]]

    def list_apps(self, site_id=None):
        params = {"site": site_id} if site_id is not None else {}
        return [ser.app_from_doc(d) for d in self._call("GET", "/apps", params=params)["apps"]]

    def create_jobs(self, drafts):
        body = {"jobs": [_draft_to_body(d) for d in drafts]}
        return [ser.job_from_doc(d) for d in self._call("POST", "/jobs", json=body)["jobs"]]

    def query_jobs(self, state=None, tags=None, site_id=None, ids=None, limit=None, offset=0):
        params: dict = {"offset": offset}
        if state is not None:
            params["state"] = str(state)
        if tags:
            params["tags"] = [f"{k}:{v}" for k, v in tags.items()]
        if site_id is not None:
            params["site"] = site_id
        if ids is not None:
            params["id"] = list(ids)
        if limit is not None:
            params["limit"] = limit
        return [ser.job_from_doc(d) for d in self._call("GET", "/jobs", params=params)["jobs"]]

    def update_jobs(self, updates):
        body = {
            "updates": [
                {
                    "job_id": u.job_id,
                    "to_state": str(u.to_state),
                    "timestamp": ser.ts_to_us(u.timestamp),
                    "data": dict(u.data),
                }
                for u in updates
            ]
        }
        doc = self._call("PATCH", "/jobs", json=body)
        return [ser.event_from_doc(d) for d in doc["events"]], doc["errors"]

    def create_batch_job(self, site_id, num_nodes, wall_time, queue="default",
                         project="default", job_mode="per-task-spawn"):
        body = {
            "site_id": site_id,
            "num_nodes": num_nodes,
            "wall_time": wall_time,
            "queue": queue,
            "project": project,
            "job_mode": job_mode,
        }
        return ser.batchjob_from_doc(self._call("POST", "/batch-jobs", json=body))

    def list_batch_jobs(self, site_id=None, states=None):
        params: dict = {}
        if site_id is not None:
            params["site"] = site_id
        if states:
            params["state"] = [str(s) for s in states]
        doc = self._call("GET", "/batch-jobs", params=params)
        return [ser.batchjob_from_doc(d) for d in doc["batch_jobs"]]

    def update_batch_jobs(self, updates):
        body = {
            "updates": [
                {
                    "batchjob_id": u.batchjob_id,
                    "state": str(u.state) if u.state is not None else None,
                    "scheduler_id": u.scheduler_id,
                }
                for u in updates
            ]
        }
        doc = self._call("PATCH", "/batch-jobs", json=body)
        return [ser.batchjob_from_doc(d) for d in doc["batch_jobs"]]

    def create_session(self, site_id, batchjob_id=None):
        body = {"site_id": site_id, "batchjob_id": batchjob_id}
        return ser.session_from_doc(self._call("POST", "/sessions", json=body))

    def acquire_jobs(self, session_id, max_num_jobs, available,
                     acquirable_states=(JobState.RESTART_READY, JobState.STAGED_IN)):
        body = {
            "max_num_jobs": max_num_jobs,
            "available": {
                "num_nodes": available.num_nodes,
                "cores_per_node": available.cores_per_node,
                "gpus_per_node": available.gpus_per_node,
            },
            "acquirable_states": [str(s) for s in acquirable_states],
        }
        doc = self._call("POST", f"/sessions/{session_id}/acquire", json=body)
        return [ser.job_from_doc(d) for d in doc["jobs"]]

    def heartbeat(self, session_id):
        return ser.session_from_doc(self._call("PUT", f"/sessions/{session_id}/heartbeat"))

    def delete_session(self, session_id):
        return self._call("DELETE", f"/sessions/{session_id}")["reset_job_ids"]

    def list_transfer_items(self, site_id, state=None, direction=None):
        params: dict = {"site": site_id}
        if state is not None:
            params["state"] = str(state)
        if direction is not None:
            params["direction"] = direction
        doc = self._call("GET", "/transfers", params=params)
        return [ser.item_from_doc(d) for d in doc["transfer_items"]]

    def update_transfer_items(self, updates):
        body = {
            "updates": [
                {
                    "item_id": u.item_id,
                    "state": str(u.state),
                    "task_ref": u.task_ref,
                    "bytes": u.bytes,
                }
                for u in updates
            ]
        }
        doc = self._call("PATCH", "/transfers", json=body)
        items = [ser.item_from_doc(d) for d in doc["transfer_items"]]
        events = [ser.event_from_doc(d) for d in doc["events"]]
        return items, events, doc["errors"]

    def query_events(self, job_id=None, from_state=None, to_state=None, begin=None,
                     end=None, tags=None, limit=None, offset=0):
        params: dict = {"offset": offset}
        if job_id is not None:
            params["job_id"] = job_id
        if from_state is not None:
            params["from_state"] = str(from_state)
        if to_state is not None:
            params["to_state"] = str(to_state)
        if begin is not None:
            params["begin"] = ser.ts_to_us(begin)
        if end is not None:
            params["end"] = ser.ts_to_us(end)
        if tags:
            params["tags"] = [f"{k}:{v}" for k, v in tags.items()]
        if limit is not None:
            params["limit"] = limit
        doc = self._call("GET", "/events", params=params)
        return [ser.event_from_doc(d) for d in doc["events"]]

    def backlog(self, site_id):
        return self._call("GET", f"/sites/{site_id}/backlog")
