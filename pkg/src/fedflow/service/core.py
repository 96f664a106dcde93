"""Service business core.

All operations are serializable: one re-entrant lock guards the store, so
concurrent acquires and bulk mutations behave as if executed one at a time.
The HTTP layer is a thin schema wrapper around this class, and the simulator
drives it directly through the same typed facade.
"""

from __future__ import annotations

import dataclasses
import heapq
import logging
import secrets
import threading
from dataclasses import dataclass, field

from fedflow.core import appspec as appspec_mod
from fedflow.core.clock import Clock, RealClock
from fedflow.core.errors import (
    AuthFailed,
    CyclicDependency,
    DuplicateUser,
    ForeignSite,
    InvalidBatchJobTransition,
    InvalidFilter,
    InvalidItemState,
    InvalidRequest,
    NotFound,
    SessionExpired,
    UnknownApp,
    UnknownSession,
)
from fedflow.core.records import (
    BATCHJOB_TRANSITIONS,
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
from fedflow.core.states import ACQUIRABLE_STATES, JobState, apply_event, readiness_state
from fedflow.service import auth
from fedflow.service.store import Store, job_node_footprint

logger = logging.getLogger(__name__)

#: States that count toward a site's pending backlog.
BACKLOG_STATES = (
    JobState.CREATED,
    JobState.AWAITING_PARENTS,
    JobState.READY,
    JobState.STAGED_IN,
    JobState.RESTART_READY,
)

MAX_ITEM_ATTEMPTS = 3


@dataclass
class ServiceConfig:
    lease_ttl: float = 60.0
    token_ttl: float = 86400.0
    max_retries: int = 3
    signing_key: str | None = None
    wal_path: str | None = None


@dataclass(frozen=True)
class JobDraft:
    app_id: int
    workdir: str
    parameters: dict[str, str] = field(default_factory=dict)
    resources: ResourceSpec = field(default_factory=ResourceSpec)
    tags: dict[str, str] = field(default_factory=dict)
    parent_ids: tuple[int, ...] = ()
    parent_refs: tuple[int, ...] = ()  # indices of earlier drafts in this batch
    transfer_bindings: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class JobUpdate:
    job_id: int
    to_state: JobState
    timestamp: float
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BatchJobUpdate:
    batchjob_id: int
    state: BatchJobState | None = None
    scheduler_id: str | None = None


@dataclass(frozen=True)
class ItemUpdate:
    item_id: int
    state: TransferState
    task_ref: str | None = None
    bytes: int | None = None


class ServiceCore:
    def __init__(self, config: ServiceConfig | None = None, clock: Clock | None = None):
        self.config = config or ServiceConfig()
        self.clock = clock or RealClock()
        self.store = Store(wal_path=self.config.wal_path)
        self.signer = auth.TokenSigner(self.config.signing_key or secrets.token_hex(16))
        self._lock = threading.RLock()

    # ---- users & auth ---------------------------------------------------------

    def register_user(self, username: str, password: str) -> UserRecord:
        """Out-of-band account creation (admin CLI or bootstrap config)."""
        with self._lock, self.store.batch():
            existing_id = self.store.users_by_name.get(username)
            if existing_id is not None:
                raise DuplicateUser(f"username {username!r} already registered")
            salt = auth.new_salt()
            user = UserRecord(
                user_id=self.store.next_id("users"),
                username=username,
                password_salt=salt,
                password_hash=auth.hash_password(password, salt),
            )
            self.store.upsert("users", user)
            self.store.index_user(user)
            return user

    def login(self, username: str, password: str) -> tuple[str, float]:
        with self._lock:
            user_id = self.store.users_by_name.get(username)
            if user_id is None:
                raise AuthFailed("unknown username or bad credential")
            user = self.store.users[user_id]
            if not auth.verify_password(password, user.password_salt, user.password_hash):
                raise AuthFailed("unknown username or bad credential")
            return self.signer.issue(user_id, self.clock.now(), self.config.token_ttl)

    def authenticate(self, token: str) -> int:
        user_id = self.signer.verify(token, self.clock.now())
        if user_id not in self.store.users:
            raise AuthFailed("token subject no longer exists")
        return user_id

    # ---- sites ------------------------------------------------------------------

    def register_site(self, user_id: int, hostname: str, path: str) -> SiteRecord:
        if not hostname or not path:
            raise InvalidRequest("hostname and path must be non-empty")
        with self._lock, self.store.batch():
            now = self.clock.now()
            existing = self.store.sites_by_key.get((user_id, hostname, path))
            if existing is not None:
                site = self.store.sites[existing]
                site.last_refresh = now
                self.store.upsert("sites", site)
                return dataclasses.replace(site)
            site = SiteRecord(
                site_id=self.store.next_id("sites"),
                owner=user_id,
                hostname=hostname,
                path=path,
                last_refresh=now,
            )
            self.store.upsert("sites", site)
            self.store.index_site(site)
            return dataclasses.replace(site)

    def list_sites(self, user_id: int) -> list[SiteRecord]:
        with self._lock:
            return [
                dataclasses.replace(s)
                for s in self.store.sites.values()
                if s.owner == user_id
            ]

    def _own_site(self, user_id: int, site_id: int) -> SiteRecord:
        site = self.store.sites.get(site_id)
        if site is None:
            raise NotFound(f"no site {site_id}")
        if site.owner != user_id:
            raise ForeignSite(f"site {site_id} belongs to another user")
        return site

    # ---- apps ---------------------------------------------------------------------

    def sync_apps(self, user_id: int, site_id: int, drafts: list[dict]) -> list[AppSpec]:
        """Upsert app definitions by (site, name); replaces existing specs."""
        with self._lock, self.store.batch():
            self._own_site(user_id, site_id)
            out = []
            for draft in drafts:
                name = draft.get("name", "")
                existing_id = self.store.apps_by_key.get((site_id, name))
                app_id = existing_id or self.store.next_id("apps")
                app = AppSpec(
                    app_id=app_id,
                    site_id=site_id,
                    name=name,
                    command_template=draft.get("command_template", ""),
                    parameters={
                        p: ParamSpec(
                            required=bool(spec.get("required", True)),
                            default=spec.get("default"),
                        )
                        for p, spec in draft.get("parameters", {}).items()
                    },
                    transfer_slots={
                        s: TransferSlot(
                            direction=slot.get("direction", "in"),
                            required=bool(slot.get("required", True)),
                            local_path=slot.get("local_path", ""),
                            recursive=bool(slot.get("recursive", False)),
                        )
                        for s, slot in draft.get("transfer_slots", {}).items()
                    },
                    environment=dict(draft.get("environment", {})),
                    cleanup_files=tuple(draft.get("cleanup_files", ())),
                )
                appspec_mod.validate_app_spec(app)
                self.store.upsert("apps", app)
                self.store.index_app(app)
                out.append(app)
            return out

    def list_apps(self, user_id: int, site_id: int | None = None) -> list[AppSpec]:
        with self._lock:
            owned_sites = {s.site_id for s in self.store.sites.values() if s.owner == user_id}
            if site_id is not None:
                if site_id not in owned_sites:
                    raise NotFound(f"no site {site_id}")
                owned_sites = {site_id}
            return [a for a in self.store.apps.values() if a.site_id in owned_sites]

    def _own_app(self, user_id: int, app_id: int) -> AppSpec:
        app = self.store.apps.get(app_id)
        if app is None:
            raise UnknownApp(f"no app {app_id}")
        site = self.store.sites[app.site_id]
        if site.owner != user_id:
            raise UnknownApp(f"no app {app_id}")
        return app

    # ---- jobs ----------------------------------------------------------------------

    def bulk_create_jobs(self, user_id: int, drafts: list[JobDraft]) -> list[JobRecord]:
        """Create a batch atomically: any invalid draft rejects the batch."""
        with self._lock, self.store.batch():
            now = self.clock.now()
            # validation pass: no mutation until every draft checks out
            staged = []
            for idx, draft in enumerate(drafts):
                app = self._own_app(user_id, draft.app_id)
                draft.resources.validate()
                appspec_mod.render_command(app, draft.parameters)
                items = appspec_mod.resolve_transfer_slots(app, draft.transfer_bindings)
                for ref in draft.parent_refs:
                    if not 0 <= ref < idx:
                        raise CyclicDependency(
                            f"draft {idx}: parent_ref {ref} must point to an earlier draft"
                        )
                for parent_id in draft.parent_ids:
                    parent = self.store.jobs.get(parent_id)
                    if parent is None or self.store.job_owner.get(parent_id) != user_id:
                        raise NotFound(f"draft {idx}: no parent job {parent_id}")
                staged.append((draft, app, items))

            created: list[JobRecord] = []
            events: list[EventRecord] = []
            for draft, app, items in staged:
                parent_ids = tuple(draft.parent_ids) + tuple(
                    created[ref].job_id for ref in draft.parent_refs
                )
                job = JobRecord(
                    job_id=self.store.next_id("jobs"),
                    app_id=app.app_id,
                    workdir=draft.workdir,
                    parameters=dict(draft.parameters),
                    resources=draft.resources,
                    tags=dict(draft.tags),
                    parent_ids=parent_ids,
                    state=JobState.CREATED,
                    transfer_bindings=dict(draft.transfer_bindings),
                )
                self.store.index_new_job(job, user_id, app.site_id)
                for item in items:
                    real = dataclasses.replace(
                        item, item_id=self.store.next_id("transfer_items"), job_id=job.job_id
                    )
                    self.store.upsert("transfer_items", real)
                    self.store.index_new_item(real)
                parent_states = [self.store.jobs[p].state for p in parent_ids]
                target = readiness_state(parent_states)
                if target == JobState.READY:
                    self._transition(job, JobState.READY, now, {}, events)
                else:
                    self._transition(job, JobState.AWAITING_PARENTS, now, {}, events)
                    if target == JobState.FAILED:
                        self._transition(
                            job, JobState.FAILED, now, {"reason": "parent_failed"}, events
                        )
                self.store.upsert("jobs", job)
                created.append(job)
            return [self._copy_job(j) for j in created]

    def query_jobs(
        self,
        user_id: int,
        state: JobState | None = None,
        tags: dict[str, str] | None = None,
        site_id: int | None = None,
        ids: list[int] | None = None,
        limit: int | None = None,
        offset: int = 0,
        order: str = "id",
    ) -> list[JobRecord]:
        if order not in ("id", "-id"):
            raise InvalidFilter(f"unsupported ordering {order!r}")
        with self._lock:
            job_ids = self.store.jobs_by_owner.get(user_id, [])
            if ids is not None:
                wanted = set(ids)
                job_ids = [j for j in job_ids if j in wanted]
            out = []
            for job_id in job_ids:
                job = self.store.jobs[job_id]
                if state is not None and job.state != state:
                    continue
                if site_id is not None and self.store.job_site[job_id] != site_id:
                    continue
                if tags and any(job.tags.get(k) != v for k, v in tags.items()):
                    continue
                out.append(job)
            if order == "-id":
                out.reverse()
            if offset:
                out = out[offset:]
            if limit is not None:
                out = out[:limit]
            return [self._copy_job(j) for j in out]

    def get_job(self, user_id: int, job_id: int) -> JobRecord:
        with self._lock:
            if self.store.job_owner.get(job_id) != user_id:
                raise NotFound(f"no job {job_id}")
            return self._copy_job(self.store.jobs[job_id])

    def bulk_update_jobs(
        self, user_id: int, updates: list[JobUpdate]
    ) -> tuple[list[EventRecord], list[dict]]:
        """Apply state updates in order; invalid items error without blocking the rest."""
        events: list[EventRecord] = []
        errors: list[dict] = []
        with self._lock, self.store.batch():
            for update in updates:
                job = self.store.jobs.get(update.job_id)
                if job is None or self.store.job_owner.get(update.job_id) != user_id:
                    errors.append(
                        {"job_id": update.job_id, "code": "not_found", "message": "no such job"}
                    )
                    continue
                try:
                    self._transition(job, update.to_state, update.timestamp, update.data, events)
                    self.store.upsert("jobs", job)
                except Exception as exc:  # noqa: BLE001 - per-item isolation
                    code = getattr(exc, "code", "error")
                    errors.append(
                        {"job_id": update.job_id, "code": code, "message": str(exc)}
                    )
        return events, errors

    # ---- transitions and their consequences --------------------------------------

    def _transition(
        self,
        job: JobRecord,
        to_state: JobState,
        timestamp: float,
        data: dict,
        events_out: list[EventRecord],
    ) -> EventRecord:
        old_state = job.state
        _, event = apply_event(job, to_state, timestamp, data)
        event = dataclasses.replace(event, event_id=self.store.next_id("events"))
        self.store.append_event(event)
        events_out.append(event)
        if to_state == JobState.READY and job.readiness_time is None:
            job.readiness_time = timestamp
        self.store.job_state_moved(job, old_state)
        self._after_transition(job, event, events_out)
        return event

    def _after_transition(self, job: JobRecord, event: EventRecord, events: list) -> None:
        state = job.state
        ts = event.timestamp
        if state == JobState.READY:
            if self._inbound_staging_complete(job.job_id):
                self._transition(job, JobState.STAGED_IN, ts, {}, events)
        elif state == JobState.RUN_DONE:
            self._release_lease(job)
            if self._outbound_staging_complete(job.job_id):
                self._transition(job, JobState.FINISHED, ts, {}, events)
        elif state == JobState.RUN_ERROR:
            self._release_lease(job)
            if job.retry_count < self.config.max_retries:
                job.retry_count += 1
                self._transition(job, JobState.RESTART_READY, ts, {"retry": job.retry_count}, events)
            else:
                self._transition(job, JobState.FAILED, ts, {"reason": "retries_exhausted"}, events)
        elif state == JobState.RUN_TIMEOUT:
            self._release_lease(job)
            self._transition(job, JobState.RESTART_READY, ts, {}, events)
        elif state in (JobState.FINISHED, JobState.FAILED):
            self._release_lease(job)
            self._propagate_to_children(job, ts, events)

    def _inbound_staging_complete(self, job_id: int) -> bool:
        for item_id in self.store.items_by_job.get(job_id, ()):
            item = self.store.transfer_items[item_id]
            if item.direction == "in" and item.state != TransferState.DONE:
                return False
        return True

    def _outbound_staging_complete(self, job_id: int) -> bool:
        for item_id in self.store.items_by_job.get(job_id, ()):
            item = self.store.transfer_items[item_id]
            if item.direction == "out" and item.state != TransferState.DONE:
                return False
        return True

    def _propagate_to_children(self, parent: JobRecord, ts: float, events: list) -> None:
        for child_id in self.store.children.get(parent.job_id, ()):
            child = self.store.jobs[child_id]
            if child.state != JobState.AWAITING_PARENTS:
                continue
            target = readiness_state(
                self.store.jobs[p].state for p in child.parent_ids
            )
            if target == JobState.READY:
                self._transition(child, JobState.READY, ts, {}, events)
                self.store.upsert("jobs", child)
            elif target == JobState.FAILED:
                self._transition(child, JobState.FAILED, ts, {"reason": "parent_failed"}, events)
                self.store.upsert("jobs", child)

    def _release_lease(self, job: JobRecord) -> None:
        if job.session_id is None:
            return
        session = self.store.sessions.get(job.session_id)
        if session is not None and job.job_id in session.acquired_job_ids:
            session.acquired_job_ids.remove(job.job_id)
            self.store.upsert("sessions", session)
        job.session_id = None
        if job.state in ACQUIRABLE_STATES:
            self.store.push_acquirable(job)

    # ---- sessions -------------------------------------------------------------------

    def create_session(self, user_id: int, site_id: int, batchjob_id: int | None = None) -> SessionRecord:
        with self._lock, self.store.batch():
            self._own_site(user_id, site_id)
            if batchjob_id is not None:
                bj = self.store.batch_jobs.get(batchjob_id)
                if bj is None or bj.site_id != site_id:
                    raise NotFound(f"no batch job {batchjob_id} at site {site_id}")
            session = SessionRecord(
                session_id=self.store.next_id("sessions"),
                site_id=site_id,
                batchjob_id=batchjob_id,
                heartbeat=self.clock.now(),
            )
            self.store.upsert("sessions", session)
            return dataclasses.replace(session, acquired_job_ids=list(session.acquired_job_ids))

    def _live_session(self, user_id: int, session_id: int) -> SessionRecord:
        session = self.store.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id}")
        self._own_site(user_id, session.site_id)
        now = self.clock.now()
        if now - session.heartbeat > self.config.lease_ttl:
            self._expire_session(session, now)
            raise SessionExpired(f"session {session_id} lease expired")
        return session

    def acquire_jobs(
        self,
        user_id: int,
        session_id: int,
        max_num_jobs: int,
        available: ResourceCapacity,
        acquirable_states: tuple[JobState, ...] = (JobState.RESTART_READY, JobState.STAGED_IN),
    ) -> list[JobRecord]:
        """Lease runnable jobs that fit: restartables first, then FIFO by readiness."""
        bad = set(acquirable_states) - ACQUIRABLE_STATES
        if bad:
            raise InvalidRequest(f"states not acquirable: {sorted(str(s) for s in bad)}")
        with self._lock, self.store.batch():
            self.expire_stale_sessions()
            session = self._live_session(user_id, session_id)
            session.heartbeat = self.clock.now()
            budget = float(available.num_nodes)
            taken: list[JobRecord] = []
            for state in (JobState.RESTART_READY, JobState.STAGED_IN):
                if state not in acquirable_states:
                    continue
                heap = self.store.acquire_index[session.site_id][state]
                skipped: list[tuple[float, int]] = []
                while heap and len(taken) < max_num_jobs and budget > 1e-9:
                    entry = heapq.heappop(heap)
                    job = self.store.jobs.get(entry[1])
                    if job is None or job.state != state or job.session_id is not None:
                        continue  # lazily dropped stale entry
                    footprint = job_node_footprint(job)
                    fits = (
                        footprint <= budget + 1e-9
                        and job.resources.cores_per_node_needed() <= available.cores_per_node
                        and job.resources.gpus_per_node_needed() <= available.gpus_per_node
                    )
                    if not fits:
                        skipped.append(entry)
                        continue
                    budget -= footprint
                    job.session_id = session.session_id
                    session.acquired_job_ids.append(job.job_id)
                    self.store.upsert("jobs", job)
                    taken.append(job)
                for entry in skipped:
                    heapq.heappush(heap, entry)
            self.store.upsert("sessions", session)
            return [self._copy_job(j) for j in taken]

    def heartbeat(self, user_id: int, session_id: int) -> SessionRecord:
        with self._lock, self.store.batch():
            session = self._live_session(user_id, session_id)
            session.heartbeat = self.clock.now()
            self.store.upsert("sessions", session)
            return dataclasses.replace(session, acquired_job_ids=list(session.acquired_job_ids))

    def delete_session(self, user_id: int, session_id: int) -> list[int]:
        """Graceful close: unstarted acquisitions return to the queue."""
        with self._lock, self.store.batch():
            session = self.store.sessions.get(session_id)
            if session is None:
                raise UnknownSession(f"no session {session_id}")
            self._own_site(user_id, session.site_id)
            return self._expire_session(session, self.clock.now())

    def expire_stale_sessions(self, now: float | None = None) -> list[int]:
        """Sweep leases whose heartbeat went stale; running work is reset."""
        now = self.clock.now() if now is None else now
        reset: list[int] = []
        with self._lock, self.store.batch():
            for session in list(self.store.sessions.values()):
                if now - session.heartbeat > self.config.lease_ttl:
                    reset.extend(self._expire_session(session, now))
        return reset

    def _expire_session(self, session: SessionRecord, now: float) -> list[int]:
        reset = []
        events: list[EventRecord] = []
        for job_id in list(session.acquired_job_ids):
            job = self.store.jobs[job_id]
            if job.state == JobState.RUNNING:
                self._transition(job, JobState.RUN_TIMEOUT, now, {"reason": "lease_expired"}, events)
                self.store.upsert("jobs", job)
                reset.append(job_id)
            elif job.session_id == session.session_id:
                job.session_id = None
                if job.state in ACQUIRABLE_STATES:
                    self.store.push_acquirable(job)
                self.store.upsert("jobs", job)
        session.acquired_job_ids.clear()
        self.store.drop_session(session.session_id)
        return reset

    # ---- batch jobs --------------------------------------------------------------------

    def create_batch_job(
        self,
        user_id: int,
        site_id: int,
        num_nodes: int,
        wall_time: int,
        queue: str = "default",
        project: str = "default",
        job_mode: str = "per-task-spawn",
    ) -> BatchJobRecord:
        if num_nodes < 1 or wall_time < 1:
            raise InvalidRequest("num_nodes and wall_time must be >= 1")
        if job_mode not in ("per-task-spawn", "node-resident"):
            raise InvalidRequest(f"unknown job_mode {job_mode!r}")
        with self._lock, self.store.batch():
            self._own_site(user_id, site_id)
            bj = BatchJobRecord(
                batchjob_id=self.store.next_id("batch_jobs"),
                site_id=site_id,
                num_nodes=num_nodes,
                wall_time=wall_time,
                queue=queue,
                project=project,
                job_mode=job_mode,
            )
            self.store.upsert("batch_jobs", bj)
            return dataclasses.replace(bj)

    def list_batch_jobs(
        self,
        user_id: int,
        site_id: int | None = None,
        states: tuple[BatchJobState, ...] | None = None,
    ) -> list[BatchJobRecord]:
        with self._lock:
            owned = {s.site_id for s in self.store.sites.values() if s.owner == user_id}
            out = []
            for bj in self.store.batch_jobs.values():
                if bj.site_id not in owned:
                    continue
                if site_id is not None and bj.site_id != site_id:
                    continue
                if states is not None and bj.state not in states:
                    continue
                out.append(dataclasses.replace(bj))
            return out

    def update_batch_jobs(self, user_id: int, updates: list[BatchJobUpdate]) -> list[BatchJobRecord]:
        with self._lock, self.store.batch():
            out = []
            for update in updates:
                bj = self.store.batch_jobs.get(update.batchjob_id)
                if bj is None:
                    raise NotFound(f"no batch job {update.batchjob_id}")
                self._own_site(user_id, bj.site_id)
                if update.state is not None and update.state != bj.state:
                    if (bj.state, update.state) not in BATCHJOB_TRANSITIONS:
                        raise InvalidBatchJobTransition(
                            f"batch job {bj.batchjob_id}: {bj.state} -> {update.state}"
                        )
                    bj.state = update.state
                    if update.state == BatchJobState.QUEUED:
                        bj.queued_at = self.clock.now()
                if update.scheduler_id is not None:
                    bj.scheduler_id = update.scheduler_id
                if bj.state in (BatchJobState.QUEUED, BatchJobState.RUNNING) and not bj.scheduler_id:
                    raise InvalidBatchJobTransition(
                        f"batch job {bj.batchjob_id}: {bj.state} requires a scheduler_id"
                    )
                self.store.upsert("batch_jobs", bj)
                out.append(dataclasses.replace(bj))
            return out

    # ---- transfers ------------------------------------------------------------------------

    def list_transfer_items(
        self,
        user_id: int,
        site_id: int,
        state: TransferState | None = None,
        direction: str | None = None,
    ) -> list[TransferItemRecord]:
        """Site transfer queue; PENDING items appear only when stage-eligible."""
        with self._lock:
            self._own_site(user_id, site_id)
            out = []
            for item_id in self.store.items_by_site.get(site_id, ()):
                item = self.store.transfer_items[item_id]
                if state is not None and item.state != state:
                    continue
                if direction is not None and item.direction != direction:
                    continue
                if item.state == TransferState.PENDING:
                    job_state = self.store.jobs[item.job_id].state
                    if item.direction == "in" and job_state != JobState.READY:
                        continue
                    if item.direction == "out" and job_state != JobState.RUN_DONE:
                        continue
                out.append(dataclasses.replace(item))
            return out

    def update_transfer_items(
        self, user_id: int, updates: list[ItemUpdate]
    ) -> tuple[list[TransferItemRecord], list[EventRecord], list[dict]]:
        items: list[TransferItemRecord] = []
        events: list[EventRecord] = []
        errors: list[dict] = []
        with self._lock, self.store.batch():
            now = self.clock.now()
            for update in updates:
                item = self.store.transfer_items.get(update.item_id)
                if item is None or self.store.job_owner.get(item.job_id) != user_id:
                    errors.append(
                        {"item_id": update.item_id, "code": "not_found", "message": "no such item"}
                    )
                    continue
                try:
                    self._apply_item_update(item, update, now, events)
                    items.append(dataclasses.replace(item))
                except Exception as exc:  # noqa: BLE001 - per-item isolation
                    errors.append(
                        {
                            "item_id": update.item_id,
                            "code": getattr(exc, "code", "error"),
                            "message": str(exc),
                        }
                    )
        return items, events, errors

    def _apply_item_update(
        self, item: TransferItemRecord, update: ItemUpdate, now: float, events: list
    ) -> None:
        src, dst = item.state, update.state
        legal = {
            (TransferState.PENDING, TransferState.ACTIVE),
            (TransferState.ACTIVE, TransferState.DONE),
            (TransferState.ACTIVE, TransferState.PENDING),
            (TransferState.ACTIVE, TransferState.ERROR),
            (TransferState.PENDING, TransferState.ERROR),
        }
        if (src, dst) not in legal:
            raise InvalidItemState(f"item {item.item_id}: {src} -> {dst}")
        if dst == TransferState.ACTIVE:
            if not update.task_ref:
                raise InvalidItemState(f"item {item.item_id}: ACTIVE requires a task_ref")
            item.task_ref = update.task_ref
            item.state = dst
        elif dst == TransferState.DONE:
            task_ref = update.task_ref or item.task_ref
            if not task_ref:
                raise InvalidItemState(
                    f"item {item.item_id}: DONE requires a task_ref or local-copy marker"
                )
            item.task_ref = task_ref
            item.state = dst
            if update.bytes is not None:
                item.bytes = update.bytes
            self._maybe_advance_staging(item, now, events)
        elif dst == TransferState.PENDING:
            # failed attempt returns to the queue until the retry budget runs out
            item.attempts += 1
            item.task_ref = None
            item.state = (
                TransferState.ERROR if item.attempts >= MAX_ITEM_ATTEMPTS else TransferState.PENDING
            )
        else:
            item.state = TransferState.ERROR
        self.store.upsert("transfer_items", item)

    def _maybe_advance_staging(self, item: TransferItemRecord, now: float, events: list) -> None:
        job = self.store.jobs[item.job_id]
        if item.direction == "in":
            if job.state == JobState.READY and self._inbound_staging_complete(job.job_id):
                self._transition(job, JobState.STAGED_IN, now, {}, events)
                self.store.upsert("jobs", job)
        else:
            if job.state == JobState.RUN_DONE and self._outbound_staging_complete(job.job_id):
                self._transition(job, JobState.FINISHED, now, {}, events)
                self.store.upsert("jobs", job)

    # ---- events & backlog ---------------------------------------------------------------------

    def query_events(
        self,
        user_id: int,
        job_id: int | None = None,
        from_state: JobState | None = None,
        to_state: JobState | None = None,
        begin: float | None = None,
        end: float | None = None,
        tags: dict[str, str] | None = None,
        limit: int | None = None,
        offset: int = 0,
    ) -> list[EventRecord]:
        with self._lock:
            if job_id is not None:
                if self.store.job_owner.get(job_id) != user_id:
                    raise NotFound(f"no job {job_id}")
                pool = self.store.events_for_job(job_id)
            else:
                pool = [
                    e for e in self.store.events if self.store.job_owner.get(e.job_id) == user_id
                ]
            out = []
            for event in pool:
                if from_state is not None and event.from_state != from_state:
                    continue
                if to_state is not None and event.to_state != to_state:
                    continue
                if begin is not None and event.timestamp < begin:
                    continue
                if end is not None and event.timestamp >= end:
                    continue
                if tags:
                    job_tags = self.store.jobs[event.job_id].tags
                    if any(job_tags.get(k) != v for k, v in tags.items()):
                        continue
                out.append(event)
            out.sort(key=lambda e: (e.timestamp, e.event_id))
            if offset:
                out = out[offset:]
            if limit is not None:
                out = out[:limit]
            return out

    def backlog_summary(self, user_id: int, site_id: int) -> dict:
        with self._lock:
            self._own_site(user_id, site_id)
            counts = self.store.site_state_counts.get(site_id, {})
            nodes = self.store.site_state_nodes.get(site_id, {})
            by_state = {str(state): int(counts.get(state, 0)) for state in JobState}
            node_demand = {str(state): round(nodes.get(state, 0.0), 6) for state in JobState}
            pending = sum(by_state[str(s)] for s in BACKLOG_STATES)
            return {
                "site_id": site_id,
                "counts": by_state,
                "nodes": node_demand,
                "pending_total": pending,
            }

    # ---- helpers ----------------------------------------------------------------------------

    @staticmethod
    def _copy_job(job: JobRecord) -> JobRecord:
        return dataclasses.replace(
            job,
            parameters=dict(job.parameters),
            tags=dict(job.tags),
            transfer_bindings=dict(job.transfer_bindings),
        )
