"""Per-facility site agent: transfers, scheduler mirroring, elastic scaling."""

from fedflow.agent.agent import SiteAgent
from fedflow.agent.config import SiteConfig, load_site_config
from fedflow.agent.elastic import ElasticPolicy, ElasticQueueModule
from fedflow.agent.platform import (
    LocalCopyBackend,
    LocalScheduler,
    SchedulerBackend,
    TaskView,
    TransferBackend,
    TransferFile,
)
from fedflow.agent.scheduler import SchedulerModule
from fedflow.agent.transfer import TransferModule, plan_transfer_batches

__all__ = [
    "ElasticPolicy",
    "ElasticQueueModule",
    "LocalCopyBackend",
    "LocalScheduler",
    "SchedulerBackend",
    "SchedulerModule",
    "SiteAgent",
    "SiteConfig",
    "TaskView",
    "TransferBackend",
    "TransferFile",
    "TransferModule",
    "load_site_config",
    "plan_transfer_batches",
]
