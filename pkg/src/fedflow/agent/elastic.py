"""Demand-driven allocation requests.

Compares the node footprint of runnable work against nodes already
requested or held, and files one batch-job request per tick to cover the
deficit, clamped to the configured size range. The count of live requests
is capped so a flapping workload cannot pile up allocations. In backfill
mode the request is shaped to the widest scheduler hole that still meets
the minimum useful walltime.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from fedflow.core.records import BatchJobState
from fedflow.core.states import JobState

from fedflow.agent.platform import SchedulerBackend

logger = logging.getLogger(__name__)

DEFAULT_RUNNABLE = (JobState.READY, JobState.STAGED_IN, JobState.RESTART_READY)


@dataclass
class ElasticPolicy:
    min_nodes: int = 1
    max_nodes: int = 8
    max_queued_batchjobs: int = 4
    wall_time: int = 20  # minutes
    job_mode: str = "per-task-spawn"
    queue: str = "default"
    project: str = "default"
    runnable_states: tuple[JobState, ...] = DEFAULT_RUNNABLE
    backfill: bool = False
    min_walltime: int = 10  # minutes


class ElasticQueueModule:
    def __init__(self, api, site_id: int, policy: ElasticPolicy,
                 backend: SchedulerBackend | None = None):
        self.api = api
        self.site_id = site_id
        self.policy = policy
        self.backend = backend

    def tick(self) -> None:
        self.request_nodes()

    def request_nodes(self) -> int:
        """File at most one allocation request; returns nodes requested."""
        live = self.api.list_batch_jobs(
            self.site_id, states=(BatchJobState.PENDING_SUBMISSION,
                                  BatchJobState.QUEUED, BatchJobState.RUNNING)
        )
        if len(live) >= self.policy.max_queued_batchjobs:
            return 0
        backlog = self.api.backlog(self.site_id)
        runnable = sum(backlog["nodes"][str(s)] for s in self.policy.runnable_states)
        held = sum(bj.num_nodes for bj in live)
        deficit = math.ceil(runnable - held)
        if deficit <= 0:
            return 0
        request = max(self.policy.min_nodes, min(self.policy.max_nodes, deficit))
        wall_time = self.policy.wall_time
        if self.policy.backfill and self.backend is not None:
            shaped = self._shape_to_backfill(request)
            if shaped is None:
                return 0
            request, wall_time = shaped
        self.api.create_batch_job(
            self.site_id,
            num_nodes=request,
            wall_time=wall_time,
            queue=self.policy.queue,
            project=self.policy.project,
            job_mode=self.policy.job_mode,
        )
        logger.info("requested %d nodes x %d min at site %d", request, wall_time, self.site_id)
        return request

    def _shape_to_backfill(self, request: int) -> tuple[int, int] | None:
        windows = [
            (nodes, minutes)
            for nodes, minutes in self.backend.backfill_windows()
            if minutes >= self.policy.min_walltime and nodes >= self.policy.min_nodes
        ]
        if not windows:
            return None
        nodes, minutes = max(windows, key=lambda w: (w[0], w[1]))
        return min(request, nodes), min(self.policy.wall_time, minutes)
