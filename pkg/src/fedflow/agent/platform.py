"""Facility platform interfaces.

A site agent talks to its facility through two narrow backends: one for
bulk data movement, one for the batch scheduler. The local implementations
below run against the filesystem and an in-memory node budget so a full
site can be exercised on a laptop; the simulator provides virtual-time
implementations of the same protocols.
"""

from __future__ import annotations

import itertools
import os
import shutil
from dataclasses import dataclass, field
from typing import Protocol

from fedflow.core.errors import SubmissionRejected


@dataclass(frozen=True)
class TransferFile:
    item_id: int
    local_path: str
    remote_path: str
    recursive: bool = False


@dataclass
class TaskView:
    state: str  # "active" | "done" | "error"
    bytes_by_item: dict[int, int] = field(default_factory=dict)


class TransferBackend(Protocol):
    def submit_task(self, direction: str, endpoint: str, files: list[TransferFile]) -> str: ...

    def poll_tasks(self, task_refs: list[str]) -> dict[str, TaskView]: ...


class SchedulerBackend(Protocol):
    def submit(self, num_nodes: int, wall_time: int, queue: str, project: str) -> str: ...

    def poll(self) -> dict[str, str]: ...  # scheduler_id -> queued|running|done|failed

    def delete(self, scheduler_id: str) -> None: ...

    def backfill_windows(self) -> list[tuple[int, int]]: ...  # (nodes, minutes)


class LocalCopyBackend:
    """Moves files between endpoint root directories with plain copies.

    An "endpoint" is a key into ``endpoint_roots``; stage-in copies from the
    endpoint root into the site data root and stage-out goes the other way.
    Tasks complete on the first poll after submission.
    """

    def __init__(self, data_root: str, endpoint_roots: dict[str, str]):
        self.data_root = data_root
        self.endpoint_roots = dict(endpoint_roots)
        self._tasks: dict[str, tuple[str, str, list[TransferFile]]] = {}
        self._seq = itertools.count(1)

    def submit_task(self, direction, endpoint, files):
        ref = f"copy.{next(self._seq)}"
        self._tasks[ref] = (direction, endpoint, list(files))
        return ref

    def poll_tasks(self, task_refs):
        out = {}
        for ref in task_refs:
            task = self._tasks.get(ref)
            if task is None:
                out[ref] = TaskView(state="error")
                continue
            out[ref] = self._run(*task)
            if out[ref].state == "done":
                del self._tasks[ref]
        return out

    def _run(self, direction, endpoint, files) -> TaskView:
        root = self.endpoint_roots.get(endpoint)
        if root is None:
            return TaskView(state="error")
        sizes: dict[int, int] = {}
        for f in files:
            local = os.path.join(self.data_root, f.local_path)
            remote = os.path.join(root, f.remote_path.lstrip("/"))
            src, dst = (remote, local) if direction == "in" else (local, remote)
            try:
                os.makedirs(os.path.dirname(dst), exist_ok=True)
                if f.recursive and os.path.isdir(src):
                    shutil.copytree(src, dst, dirs_exist_ok=True)
                    sizes[f.item_id] = sum(
                        e.stat().st_size for e in os.scandir(dst) if e.is_file()
                    )
                else:
                    shutil.copy(src, dst)
                    sizes[f.item_id] = os.stat(dst).st_size
            except OSError:
                return TaskView(state="error")
        return TaskView(state="done", bytes_by_item=sizes)


class LocalScheduler:
    """In-memory scheduler with a fixed node budget and FIFO starts."""

    def __init__(self, total_nodes: int = 8, reject_over_budget: bool = False):
        self.total_nodes = total_nodes
        self.reject_over_budget = reject_over_budget
        self._queue: list[str] = []
        self._nodes: dict[str, int] = {}
        self._running: set[str] = set()
        self._seq = itertools.count(1)

    def submit(self, num_nodes, wall_time, queue, project):
        if self.reject_over_budget and num_nodes > self.total_nodes:
            raise SubmissionRejected(f"{num_nodes} nodes exceeds partition of {self.total_nodes}")
        ref = f"local.{next(self._seq)}"
        self._nodes[ref] = num_nodes
        self._queue.append(ref)
        return ref

    def poll(self):
        self._start_fifo()
        out = {}
        for ref in self._queue:
            out[ref] = "running" if ref in self._running else "queued"
        return out

    def delete(self, scheduler_id):
        if scheduler_id in self._queue:
            self._queue.remove(scheduler_id)
        self._running.discard(scheduler_id)
        self._nodes.pop(scheduler_id, None)

    def backfill_windows(self):
        free = self.total_nodes - sum(self._nodes[r] for r in self._running)
        return [(free, 24 * 60)] if free > 0 else []

    def _start_fifo(self):
        used = sum(self._nodes[r] for r in self._running)
        for ref in self._queue:
            if ref in self._running:
                continue
            if used + self._nodes[ref] <= self.total_nodes:
                self._running.add(ref)
                used += self._nodes[ref]
            else:
                break
