"""Batch-job mirroring between the service and a facility scheduler.

The service holds desired state (rows created by users or the elastic
module); the scheduler holds actual state. Each tick submits new requests,
executes deletions, reflects scheduler status back, and gives up on
requests that sit in the queue longer than ``max_queue_wait``.
"""

from __future__ import annotations

import logging

from fedflow.core.errors import SubmissionRejected
from fedflow.core.records import BATCHJOB_TRANSITIONS, BatchJobState
from fedflow.service.core import BatchJobUpdate

from fedflow.agent.platform import SchedulerBackend

logger = logging.getLogger(__name__)

MIRROR = {
    "queued": BatchJobState.QUEUED,
    "running": BatchJobState.RUNNING,
    "done": BatchJobState.FINISHED,
    "failed": BatchJobState.FAILED,
}

LIVE_STATES = (
    BatchJobState.PENDING_SUBMISSION,
    BatchJobState.QUEUED,
    BatchJobState.RUNNING,
    BatchJobState.PENDING_DELETION,
)


class SchedulerModule:
    def __init__(
        self,
        api,
        site_id: int,
        backend: SchedulerBackend,
        clock,
        max_queue_wait: float | None = None,
    ):
        self.api = api
        self.site_id = site_id
        self.backend = backend
        self.clock = clock
        self.max_queue_wait = max_queue_wait
        # submit times survive only as long as the agent; after a restart a
        # queued job's wait clock starts over, which only delays the give-up
        self._submitted_at: dict[int, float] = {}

    def tick(self) -> None:
        rows = self.api.list_batch_jobs(self.site_id, states=LIVE_STATES)
        self._submit_new([r for r in rows if r.state == BatchJobState.PENDING_SUBMISSION])
        self._delete_pending([r for r in rows if r.state == BatchJobState.PENDING_DELETION])
        still_queued = self._mirror_status(
            [r for r in rows if r.state in (BatchJobState.QUEUED, BatchJobState.RUNNING)]
        )
        self._expire_stuck(still_queued)

    def _submit_new(self, rows) -> None:
        updates = []
        now = self.clock.now()
        for bj in rows:
            try:
                scheduler_id = self.backend.submit(
                    bj.num_nodes, bj.wall_time, bj.queue, bj.project
                )
            except SubmissionRejected as exc:
                logger.warning("batch job %d rejected: %s", bj.batchjob_id, exc)
                updates.append(
                    BatchJobUpdate(batchjob_id=bj.batchjob_id, state=BatchJobState.FAILED)
                )
                continue
            self._submitted_at[bj.batchjob_id] = now
            updates.append(
                BatchJobUpdate(
                    batchjob_id=bj.batchjob_id,
                    state=BatchJobState.QUEUED,
                    scheduler_id=scheduler_id,
                )
            )
        if updates:
            self.api.update_batch_jobs(updates)

    def _delete_pending(self, rows) -> None:
        updates = []
        for bj in rows:
            if bj.scheduler_id:
                self.backend.delete(bj.scheduler_id)
            updates.append(
                BatchJobUpdate(batchjob_id=bj.batchjob_id, state=BatchJobState.FINISHED)
            )
            self._submitted_at.pop(bj.batchjob_id, None)
        if updates:
            self.api.update_batch_jobs(updates)

    def _mirror_status(self, rows) -> list:
        """Reflect scheduler truth onto the rows; returns rows still queued."""
        if not rows:
            return []
        seen = self.backend.poll()
        updates = []
        still_queued = []
        for bj in rows:
            actual = MIRROR.get(seen.get(bj.scheduler_id, "done"))
            if actual == bj.state or actual is None:
                if bj.state == BatchJobState.QUEUED:
                    still_queued.append(bj)
                continue
            if (bj.state, actual) not in BATCHJOB_TRANSITIONS:
                # a queued job that ended without running reconciles through
                # the deletion path over two ticks
                actual = BatchJobState.PENDING_DELETION
                if (bj.state, actual) not in BATCHJOB_TRANSITIONS:
                    continue
            updates.append(BatchJobUpdate(batchjob_id=bj.batchjob_id, state=actual))
            if actual in (BatchJobState.FINISHED, BatchJobState.FAILED):
                self._submitted_at.pop(bj.batchjob_id, None)
        if updates:
            self.api.update_batch_jobs(updates)
        return still_queued

    def _expire_stuck(self, rows) -> None:
        if self.max_queue_wait is None:
            return
        now = self.clock.now()
        updates = []
        for bj in rows:
            waited = now - self._submitted_at.setdefault(bj.batchjob_id, now)
            if waited > self.max_queue_wait:
                logger.info(
                    "batch job %d queued %.0fs, giving up", bj.batchjob_id, waited
                )
                updates.append(
                    BatchJobUpdate(
                        batchjob_id=bj.batchjob_id, state=BatchJobState.PENDING_DELETION
                    )
                )
        if updates:
            self.api.update_batch_jobs(updates)
