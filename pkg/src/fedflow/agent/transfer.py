"""Site-side transfer batching.

The service exposes a flat queue of pending items; this module turns it
into a small number of bulk backend tasks. Items are grouped by
(endpoint, direction) and submitted in FIFO chunks, stage-out ahead of
stage-in so finished results leave the facility before new inputs compete
for the same streams. Concurrency is capped so a site never floods its
transfer backend.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from fedflow.core.appspec import parse_remote_uri
from fedflow.core.records import TransferItemRecord, TransferState
from fedflow.service.core import ItemUpdate

from fedflow.agent.platform import TransferBackend, TransferFile

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransferBatch:
    endpoint: str
    direction: str
    items: tuple[TransferItemRecord, ...]


def plan_transfer_batches(
    items: list[TransferItemRecord], batch_size: int
) -> list[TransferBatch]:
    """Group pending items into backend-task-sized batches.

    Outbound groups come first; within a group, items keep queue (id) order
    and are split into chunks of at most ``batch_size`` files.
    """
    groups: dict[tuple[str, str], list[TransferItemRecord]] = {}
    for item in items:
        endpoint, _ = parse_remote_uri(item.remote_uri)
        groups.setdefault((endpoint, item.direction), []).append(item)

    batches = []
    ordered = sorted(groups.items(), key=lambda kv: (kv[0][1] != "out", kv[0][0]))
    for (endpoint, direction), members in ordered:
        members.sort(key=lambda i: i.item_id)
        for start in range(0, len(members), batch_size):
            chunk = tuple(members[start : start + batch_size])
            batches.append(TransferBatch(endpoint=endpoint, direction=direction, items=chunk))
    return batches


class TransferModule:
    def __init__(
        self,
        api,
        site_id: int,
        backend: TransferBackend,
        allowed_endpoints: list[str],
        batch_size: int = 32,
        max_concurrent_tasks: int = 3,
    ):
        self.api = api
        self.site_id = site_id
        self.backend = backend
        self.allowed_endpoints = set(allowed_endpoints)
        self.batch_size = batch_size
        self.max_concurrent_tasks = max_concurrent_tasks
        self._live_tasks: set[str] = set()

    def tick(self) -> None:
        items = self.api.list_transfer_items(self.site_id)
        self._adopt_running(items)
        self._poll_live(items)
        self._reject_untrusted(items)
        self._admit_pending(items)

    # A restarted agent finds ACTIVE items whose tasks it never saw and
    # resumes polling them instead of resubmitting the data.
    def _adopt_running(self, items) -> None:
        for item in items:
            if item.state == TransferState.ACTIVE and item.task_ref:
                self._live_tasks.add(item.task_ref)

    def _poll_live(self, items) -> None:
        if not self._live_tasks:
            return
        by_ref: dict[str, list[TransferItemRecord]] = {}
        for item in items:
            if item.state == TransferState.ACTIVE and item.task_ref in self._live_tasks:
                by_ref.setdefault(item.task_ref, []).append(item)
        statuses = self.backend.poll_tasks(sorted(by_ref))
        updates = []
        for ref, status in statuses.items():
            members = by_ref.get(ref, [])
            if status.state == "done":
                for item in members:
                    updates.append(
                        ItemUpdate(
                            item_id=item.item_id,
                            state=TransferState.DONE,
                            bytes=status.bytes_by_item.get(item.item_id),
                        )
                    )
                self._live_tasks.discard(ref)
            elif status.state == "error":
                # back to the queue; the service owns the retry budget
                for item in members:
                    updates.append(ItemUpdate(item_id=item.item_id, state=TransferState.PENDING))
                self._live_tasks.discard(ref)
        if updates:
            _, _, errors = self.api.update_transfer_items(updates)
            for err in errors:
                logger.warning("transfer update rejected: %s", err)

    def _reject_untrusted(self, items) -> None:
        updates = []
        for item in items:
            if item.state != TransferState.PENDING:
                continue
            endpoint, _ = parse_remote_uri(item.remote_uri)
            if endpoint not in self.allowed_endpoints:
                logger.warning(
                    "item %d names untrusted endpoint %r", item.item_id, endpoint
                )
                updates.append(ItemUpdate(item_id=item.item_id, state=TransferState.ERROR))
        if updates:
            self.api.update_transfer_items(updates)

    def _admit_pending(self, items) -> None:
        pending = [
            i
            for i in items
            if i.state == TransferState.PENDING
            and parse_remote_uri(i.remote_uri)[0] in self.allowed_endpoints
        ]
        if not pending:
            return
        workdirs = self._workdirs_for(pending)
        for batch in plan_transfer_batches(pending, self.batch_size):
            if len(self._live_tasks) >= self.max_concurrent_tasks:
                return
            files = [
                TransferFile(
                    item_id=item.item_id,
                    local_path=f"{workdirs[item.job_id]}/{item.local_path}",
                    remote_path=parse_remote_uri(item.remote_uri)[1],
                    recursive=item.recursive,
                )
                for item in batch.items
            ]
            ref = self.backend.submit_task(batch.direction, batch.endpoint, files)
            self._live_tasks.add(ref)
            self.api.update_transfer_items(
                [
                    ItemUpdate(item_id=i.item_id, state=TransferState.ACTIVE, task_ref=ref)
                    for i in batch.items
                ]
            )

    def _workdirs_for(self, items) -> dict[int, str]:
        job_ids = sorted({i.job_id for i in items})
        jobs = self.api.query_jobs(ids=job_ids)
        return {j.job_id: j.workdir for j in jobs}
