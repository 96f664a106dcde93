"""Virtual-time implementations of the three platform interfaces.

These plug into the unmodified agent and launcher: SimScheduler stands in
for the facility batch system, SimTransfer for the WAN transfer service,
and SimAppRun for process execution. All of them read time from the shared
virtual clock and randomness from named substreams, so a scenario replays
identically for a given seed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from fedflow.agent.platform import TaskView, TransferFile
from fedflow.core.clock import Clock
from fedflow.core.errors import SubmissionRejected
from fedflow.core.records import AppSpec, JobRecord
from fedflow.launcher.apprun import RunStatus

from fedflow.sim.models import (
    QueueDelayModel,
    RuntimeModel,
    UnknownApp,
    UnknownQueue,
    sample_queue_delay,
    sample_runtime,
)
from fedflow.sim.network import TransferNetwork


@dataclass
class SimAllocation:
    ref: str
    num_nodes: int
    wall_time: int  # minutes
    submit_time: float
    eligible_time: float
    start_time: float | None = None
    completed_at: float | None = None
    killed_at: float | None = None
    deleted: bool = False

    def walltime_end(self) -> float | None:
        if self.start_time is None:
            return None
        return self.start_time + self.wall_time * 60.0

    def ended(self, now: float) -> bool:
        if self.killed_at is not None or self.completed_at is not None:
            return True
        end = self.walltime_end()
        return end is not None and now >= end


class SimScheduler:
    """Queue delays are lognormal per queue; capacity (if set) is FCFS."""

    def __init__(
        self,
        clock: Clock,
        rng: np.random.Generator,
        queues: dict[str, QueueDelayModel],
        total_nodes: int | None = None,
        static_backfill: list[tuple[int, int]] | None = None,
    ):
        self.clock = clock
        self.rng = rng
        self.queues = dict(queues)
        self.total_nodes = total_nodes
        self.static_backfill = list(static_backfill or [])
        self.allocations: dict[str, SimAllocation] = {}
        self._seq = itertools.count(1)

    # SchedulerBackend interface ------------------------------------------

    def submit(self, num_nodes: int, wall_time: int, queue: str, project: str) -> str:
        model = self.queues.get(queue)
        if model is None:
            raise UnknownQueue(f"queue {queue!r} not configured")
        if self.total_nodes is not None and num_nodes > self.total_nodes:
            raise SubmissionRejected(
                f"{num_nodes} nodes exceeds partition of {self.total_nodes}"
            )
        now = self.clock.now()
        ref = f"sim.{next(self._seq)}"
        self.allocations[ref] = SimAllocation(
            ref=ref,
            num_nodes=num_nodes,
            wall_time=wall_time,
            submit_time=now,
            eligible_time=now + sample_queue_delay(model, self.rng),
        )
        return ref

    def poll(self) -> dict[str, str]:
        now = self.clock.now()
        self._start_eligible(now)
        out = {}
        for ref, alloc in self.allocations.items():
            if alloc.killed_at is not None:
                out[ref] = "failed"
            elif alloc.deleted and alloc.start_time is None:
                out[ref] = "done"
            elif alloc.start_time is None:
                out[ref] = "queued"
            elif alloc.ended(now):
                out[ref] = "done"
            else:
                out[ref] = "running"
        return out

    def delete(self, scheduler_id: str) -> None:
        alloc = self.allocations.get(scheduler_id)
        if alloc is None:
            return
        alloc.deleted = True
        if alloc.start_time is not None and not alloc.ended(self.clock.now()):
            alloc.completed_at = self.clock.now()

    def backfill_windows(self) -> list[tuple[int, int]]:
        if self.total_nodes is None:
            return list(self.static_backfill)
        free = self.total_nodes - self._nodes_in_use(self.clock.now())
        return [(free, 24 * 60)] if free > 0 else []

    # Simulation-side controls ---------------------------------------------

    def kill(self, scheduler_id: str, at: float | None = None) -> None:
        alloc = self.allocations[scheduler_id]
        if not alloc.ended(at if at is not None else self.clock.now()):
            alloc.killed_at = at if at is not None else self.clock.now()

    def mark_complete(self, scheduler_id: str) -> None:
        alloc = self.allocations[scheduler_id]
        if alloc.completed_at is None and alloc.killed_at is None:
            alloc.completed_at = self.clock.now()

    def live_started(self) -> list[SimAllocation]:
        now = self.clock.now()
        self._start_eligible(now)
        return [
            a
            for a in self.allocations.values()
            if a.start_time is not None and not a.ended(now)
        ]

    def _nodes_in_use(self, now: float) -> int:
        return sum(
            a.num_nodes
            for a in self.allocations.values()
            if a.start_time is not None and not a.ended(now)
        )

    def _start_eligible(self, now: float) -> None:
        used = self._nodes_in_use(now)
        for alloc in self.allocations.values():
            if alloc.start_time is not None or alloc.deleted or alloc.killed_at:
                continue
            if alloc.eligible_time > now:
                continue
            if self.total_nodes is not None and used + alloc.num_nodes > self.total_nodes:
                continue
            alloc.start_time = now
            used += alloc.num_nodes


class SimTransfer:
    """TransferBackend over the fluid network; tasks finish at computed times."""

    def __init__(self, clock: Clock, network: TransferNetwork, site_endpoint: str):
        self.clock = clock
        self.network = network
        self.site_endpoint = site_endpoint
        self._tasks: dict[str, tuple[float, dict[int, int]]] = {}
        self._seq = itertools.count(1)

    def submit_task(self, direction: str, endpoint: str, files: list[TransferFile]) -> str:
        sizes = [self.network.size_mb(f.remote_path) for f in files]
        if direction == "in":
            src, dst = endpoint, self.site_endpoint
        else:
            src, dst = self.site_endpoint, endpoint
        _, completion = self.network.submit(src, dst, sizes, self.clock.now())
        ref = f"xfer.{next(self._seq)}"
        bytes_by_item = {
            f.item_id: int(mb * 1_000_000) for f, mb in zip(files, sizes)
        }
        self._tasks[ref] = (completion, bytes_by_item)
        return ref

    def poll_tasks(self, task_refs: list[str]) -> dict[str, TaskView]:
        now = self.clock.now()
        out = {}
        for ref in task_refs:
            task = self._tasks.get(ref)
            if task is None:
                out[ref] = TaskView(state="error")
                continue
            completion, bytes_by_item = task
            if now >= completion:
                out[ref] = TaskView(state="done", bytes_by_item=bytes_by_item)
            else:
                out[ref] = TaskView(state="active")
        return out


@dataclass
class _SimRun:
    exit_time: float
    returncode: int = 0


class SimAppRun:
    """AppRun whose exit times are sampled when the task is dispatched.

    Spawns within one virtual instant are staggered by a small dispatch
    cost, and every run pays a fixed startup delay before useful work, so
    launch overheads show up in the event record the way they would on a
    real machine.
    """

    def __init__(
        self,
        clock: Clock,
        rng: np.random.Generator,
        runtimes: dict[str, RuntimeModel],
        startup_delay: float = 1.0,
        dispatch_stagger: float = 0.01,
    ):
        self.clock = clock
        self.rng = rng
        self.runtimes = dict(runtimes)
        self.startup_delay = startup_delay
        self.dispatch_stagger = dispatch_stagger
        self._stagger_tick = -1.0
        self._stagger_n = 0

    def spawn(self, job: JobRecord, app: AppSpec, node_ids: list[int]) -> _SimRun:
        model = self.runtimes.get(app.name) or self.runtimes.get("default")
        if model is None:
            raise UnknownApp(f"no runtime model for app {app.name!r}")
        now = self.clock.now()
        if now == self._stagger_tick:
            self._stagger_n += 1
        else:
            self._stagger_tick = now
            self._stagger_n = 0
        lag = self.startup_delay + self.dispatch_stagger * self._stagger_n
        return _SimRun(exit_time=now + lag + sample_runtime(model, self.rng))

    def poll(self, handle: _SimRun) -> RunStatus:
        if self.clock.now() >= handle.exit_time:
            return RunStatus(
                done=True, returncode=handle.returncode, finished_at=handle.exit_time
            )
        return RunStatus(done=False)

    def terminate(self, handle: _SimRun) -> None:
        handle.exit_time = min(handle.exit_time, self.clock.now())
