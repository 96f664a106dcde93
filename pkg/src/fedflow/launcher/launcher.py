"""Pilot job: session + heartbeats, acquire, pack, run, report.

One control loop owns all node bookkeeping. Each tick: renew the lease if
due, reap finished tasks, acquire new work sized to current idle capacity
(never more, so concurrent launchers stay fair), place and spawn, then check
the idle timer. Walltime shutdown happens a grace period early so RUN_TIMEOUT
patches reach the service before the allocation is killed.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

from fedflow.client.api import Api
from fedflow.core.clock import Clock, RealClock
from fedflow.core.errors import FedflowError
from fedflow.core.records import AppSpec, JobRecord, ResourceCapacity
from fedflow.core.states import JobState
from fedflow.launcher.apprun import AppRun, SpawnError
from fedflow.launcher.resources import NodeResource, make_nodes, pack_assignments
from fedflow.service.core import JobUpdate

log = logging.getLogger("fedflow.launcher")

ACQUIRE_STATES = (JobState.RESTART_READY, JobState.STAGED_IN)


@dataclass(frozen=True)
class LauncherConfig:
    job_mode: str = "per-task-spawn"  # or "node-resident"
    wall_time_minutes: int = 0  # 0: no walltime limit
    grace_seconds: float = 30.0
    idle_timeout: float = 120.0
    tick_interval: float = 1.0
    session_ttl: float = 60.0
    prefetch_factor: float = 1.0


@dataclass
class _LiveTask:
    job: JobRecord
    handle: object
    node_ids: list[int]


@dataclass
class Launcher:
    api: Api
    site_id: int
    app_run: AppRun
    num_nodes: int
    cores_per_node: int
    gpus_per_node: float = 0.0
    batchjob_id: int | None = None
    config: LauncherConfig = field(default_factory=LauncherConfig)
    clock: Clock = field(default_factory=RealClock)

    def __post_init__(self) -> None:
        if self.config.job_mode not in ("per-task-spawn", "node-resident"):
            raise ValueError(f"unknown job_mode {self.config.job_mode!r}")
        self.nodes: list[NodeResource] = make_nodes(
            self.num_nodes, self.cores_per_node, self.gpus_per_node
        )
        self.backlog: list[JobRecord] = []
        self.live: dict[int, _LiveTask] = {}
        self.session_id: int | None = None
        self.started_at = 0.0
        self.last_heartbeat = 0.0
        self.last_activity = 0.0
        self.finished = False
        self.shutdown_reason: str | None = None
        self._apps: dict[int, AppSpec] = {}

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        now = self.clock.now()
        session = self.api.create_session(self.site_id, self.batchjob_id)
        self.session_id = session.session_id
        self.started_at = now
        self.last_heartbeat = now
        self.last_activity = now
        self._apps = {a.app_id: a for a in self.api.list_apps(self.site_id)}

    def run(self) -> None:
        """Real-time loop; the simulator drives tick() directly instead."""
        self.start()
        try:
            while not self.finished:
                self.tick(self.clock.now())
                if not self.finished:
                    time.sleep(self.config.tick_interval)
        except KeyboardInterrupt:
            self.shutdown("signal", self.clock.now())

    def shutdown(self, reason: str, now: float) -> None:
        if self.finished:
            return
        if reason in ("walltime", "signal"):
            updates = []
            for task in self.live.values():
                self.app_run.terminate(task.handle)
                updates.append(
                    JobUpdate(
                        job_id=task.job.job_id,
                        to_state=JobState.RUN_TIMEOUT,
                        timestamp=now,
                        data={"reason": reason},
                    )
                )
            if updates:
                self._patch(updates)
        self.live.clear()
        self.backlog.clear()
        if self.session_id is not None:
            try:
                self.api.delete_session(self.session_id)
            except FedflowError as exc:
                log.warning("session %s delete failed: %s", self.session_id, exc)
            self.session_id = None
        self.finished = True
        self.shutdown_reason = reason

    # -- one scheduling round ----------------------------------------------

    def tick(self, now: float) -> None:
        if self.finished:
            return
        if self.session_id is None:
            self.start()
            now = self.clock.now()
        if self._walltime_exhausted(now):
            self.shutdown("walltime", now)
            return
        if not self._heartbeat_if_due(now):
            return
        self._reap_exits(now)
        self._acquire(now)
        self._launch(now)
        if self._idle_expired(now):
            self.shutdown("idle", now)

    def _walltime_exhausted(self, now: float) -> bool:
        if self.config.wall_time_minutes <= 0:
            return False
        deadline = self.started_at + self.config.wall_time_minutes * 60.0
        return now >= deadline - self.config.grace_seconds

    def _heartbeat_if_due(self, now: float) -> bool:
        """Renews the lease; a rejected renewal means the service already
        reclaimed our jobs, so local work is orphaned and must stop."""
        if now - self.last_heartbeat < self.config.session_ttl / 3.0:
            return True
        try:
            self.api.heartbeat(self.session_id)
        except FedflowError as exc:
            log.error("lease lost (%s); terminating local tasks", exc)
            for task in self.live.values():
                self.app_run.terminate(task.handle)
            self.live.clear()
            self.backlog.clear()
            self.session_id = None
            self.finished = True
            self.shutdown_reason = "lease-lost"
            return False
        self.last_heartbeat = now
        return True

    def _reap_exits(self, now: float) -> None:
        updates: list[JobUpdate] = []
        for job_id in list(self.live):
            task = self.live[job_id]
            status = self.app_run.poll(task.handle)
            if not status.done:
                continue
            ended = status.finished_at if status.finished_at is not None else now
            if status.returncode == 0:
                updates.append(
                    JobUpdate(job_id=job_id, to_state=JobState.RUN_DONE, timestamp=ended)
                )
            else:
                data = {"exit_code": status.returncode}
                if status.error:
                    data["error"] = status.error
                updates.append(
                    JobUpdate(
                        job_id=job_id,
                        to_state=JobState.RUN_ERROR,
                        timestamp=ended,
                        data=data,
                    )
                )
            self._free_nodes(job_id)
            del self.live[job_id]
            self.last_activity = now
        if updates:
            self._patch(updates)

    def _acquire(self, now: float) -> None:
        budget = self._idle_budget()
        if budget <= 1e-9:
            return
        idle_nodes = sum(1 for n in self.nodes if not n.busy)
        max_jobs = max(
            1,
            int(self.config.prefetch_factor * math.ceil(budget) * self.cores_per_node),
        )
        if self.config.job_mode == "node-resident":
            max_jobs = max(1, int(self.config.prefetch_factor * max(idle_nodes, 1)))
        try:
            got = self.api.acquire_jobs(
                self.session_id,
                max_num_jobs=max_jobs,
                available=ResourceCapacity(
                    num_nodes=budget,
                    cores_per_node=self.cores_per_node,
                    gpus_per_node=self.gpus_per_node,
                ),
                acquirable_states=ACQUIRE_STATES,
            )
        except FedflowError as exc:
            log.warning("acquire failed: %s", exc)
            return
        if got:
            self.backlog.extend(got)
            self.last_heartbeat = now  # acquire refreshes the lease service-side
            self.last_activity = now

    def _idle_budget(self) -> float:
        if self.config.job_mode == "node-resident":
            return float(sum(1 for n in self.nodes if not n.busy))
        return sum(n.free_fraction() for n in self.nodes)

    def _launch(self, now: float) -> None:
        max_residents = 1 if self.config.job_mode == "node-resident" else None
        placed, leftover = pack_assignments(self.backlog, self.nodes, max_residents)
        self.backlog = leftover
        if not placed:
            return
        updates = [
            JobUpdate(job_id=job.job_id, to_state=JobState.RUNNING, timestamp=now)
            for job, _ in placed
        ]
        _, errors = self._patch(updates)
        rejected = {e["job_id"] for e in errors}
        for job, node_ids in placed:
            if job.job_id in rejected:
                # Lease raced with an expiry sweep; the service owns the job now.
                self._free_nodes(job.job_id)
                continue
            app = self._apps.get(job.app_id)
            if app is None:
                self._apps = {a.app_id: a for a in self.api.list_apps(self.site_id)}
                app = self._apps.get(job.app_id)
            try:
                if app is None:
                    raise SpawnError(f"job {job.job_id}: unknown app {job.app_id}")
                handle = self.app_run.spawn(job, app, node_ids)
            except SpawnError as exc:
                self._patch(
                    [
                        JobUpdate(
                            job_id=job.job_id,
                            to_state=JobState.RUN_ERROR,
                            timestamp=now,
                            data={"exit_code": -1, "error": str(exc)},
                        )
                    ]
                )
                self._free_nodes(job.job_id)
                continue
            self.live[job.job_id] = _LiveTask(job=job, handle=handle, node_ids=node_ids)
            self.last_activity = now

    def _idle_expired(self, now: float) -> bool:
        if self.live or self.backlog:
            return False
        return now - self.last_activity >= self.config.idle_timeout

    def _free_nodes(self, job_id: int) -> None:
        for node in self.nodes:
            node.remove(job_id)

    def _patch(self, updates: list[JobUpdate]):
        events, errors = self.api.update_jobs(updates)
        for err in errors:
            log.warning("job %s update rejected: %s", err.get("job_id"), err.get("message"))
        return events, errors
