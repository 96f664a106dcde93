"""Site agent configuration file."""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from fedflow.core.errors import ConfigError
from fedflow.core.states import JobState

from fedflow.agent.elastic import DEFAULT_RUNNABLE, ElasticPolicy


@dataclass
class SiteConfig:
    hostname: str
    path: str
    data_root: str = "."
    allowed_endpoints: list[str] = field(default_factory=list)
    endpoint_roots: dict[str, str] = field(default_factory=dict)
    batch_size: int = 32
    max_concurrent_tasks: int = 3
    scheduler_kind: str = "local"
    total_nodes: int = 8
    max_queue_wait: float | None = None
    poll_interval: float = 1.0
    elastic: ElasticPolicy | None = None


def load_site_config(path: str) -> SiteConfig:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    try:
        site = raw["site"]
        cfg = SiteConfig(hostname=site["hostname"], path=site["path"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: site.hostname and site.path are required") from exc
    cfg.data_root = site.get("data_root", cfg.data_root)

    transfer = raw.get("transfer", {})
    cfg.allowed_endpoints = list(transfer.get("allowed_endpoints", []))
    cfg.endpoint_roots = dict(transfer.get("endpoint_roots", {}))
    cfg.batch_size = int(transfer.get("batch_size", cfg.batch_size))
    cfg.max_concurrent_tasks = int(
        transfer.get("max_concurrent_tasks", cfg.max_concurrent_tasks)
    )

    sched = raw.get("scheduler", {})
    cfg.scheduler_kind = sched.get("kind", cfg.scheduler_kind)
    cfg.total_nodes = int(sched.get("total_nodes", cfg.total_nodes))
    if "max_queue_wait" in sched:
        cfg.max_queue_wait = float(sched["max_queue_wait"])
    cfg.poll_interval = float(raw.get("agent", {}).get("poll_interval", cfg.poll_interval))

    elastic = raw.get("elastic")
    if elastic and elastic.get("enabled", True):
        states = tuple(
            JobState(s) for s in elastic.get("runnable_states", [str(s) for s in DEFAULT_RUNNABLE])
        )
        cfg.elastic = ElasticPolicy(
            min_nodes=int(elastic.get("min_nodes", 1)),
            max_nodes=int(elastic.get("max_nodes", 8)),
            max_queued_batchjobs=int(elastic.get("max_queued_batchjobs", 4)),
            wall_time=int(elastic.get("wall_time", 20)),
            job_mode=elastic.get("job_mode", "per-task-spawn"),
            queue=elastic.get("queue", "default"),
            project=elastic.get("project", "default"),
            runnable_states=states,
            backfill=bool(elastic.get("backfill", False)),
            min_walltime=int(elastic.get("min_walltime", 10)),
        )
    return cfg
