"""Site agent: one process per facility account.

Owns no state beyond module bookkeeping; everything authoritative lives in
the service. Each tick runs the transfer, scheduler, and elastic modules
once. The agent registers (or refreshes) its site row on startup, so
pointing a fresh agent at an existing hostname/path pair resumes that
site's work.
"""

from __future__ import annotations

import logging
import time

from fedflow.core.clock import Clock, RealClock

from fedflow.agent.config import SiteConfig
from fedflow.agent.elastic import ElasticQueueModule
from fedflow.agent.platform import LocalCopyBackend, LocalScheduler, SchedulerBackend, TransferBackend
from fedflow.agent.scheduler import SchedulerModule
from fedflow.agent.transfer import TransferModule

logger = logging.getLogger(__name__)


class SiteAgent:
    def __init__(
        self,
        api,
        config: SiteConfig,
        transfer_backend: TransferBackend | None = None,
        scheduler_backend: SchedulerBackend | None = None,
        clock: Clock | None = None,
    ):
        self.api = api
        self.config = config
        self.clock = clock or RealClock()
        site = api.register_site(config.hostname, config.path)
        self.site_id = site.site_id
        transfer_backend = transfer_backend or LocalCopyBackend(
            config.data_root, config.endpoint_roots
        )
        scheduler_backend = scheduler_backend or LocalScheduler(config.total_nodes)
        self.transfer = TransferModule(
            api,
            self.site_id,
            transfer_backend,
            allowed_endpoints=config.allowed_endpoints,
            batch_size=config.batch_size,
            max_concurrent_tasks=config.max_concurrent_tasks,
        )
        self.scheduler = SchedulerModule(
            api, self.site_id, scheduler_backend, self.clock,
            max_queue_wait=config.max_queue_wait,
        )
        self.elastic = (
            ElasticQueueModule(api, self.site_id, config.elastic, backend=scheduler_backend)
            if config.elastic
            else None
        )

    def tick(self) -> None:
        self.transfer.tick()
        self.scheduler.tick()
        if self.elastic:
            self.elastic.tick()

    def run(self, stop_after: float | None = None) -> None:
        deadline = None if stop_after is None else time.monotonic() + stop_after
        logger.info("agent serving site %d", self.site_id)
        while deadline is None or time.monotonic() < deadline:
            try:
                self.tick()
            except Exception:
                logger.exception("tick failed; retrying next interval")
            time.sleep(self.config.poll_interval)
