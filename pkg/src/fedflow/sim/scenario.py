"""Scenario definitions for the simulation runner.

A scenario describes one virtual experiment: the sites with their queue and
node characteristics, the transfer fabric, app runtime models, a scripted
client workload, and optional failure injection. Everything stochastic hangs
off the single seed. Scenarios load from YAML files or plain dicts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from fedflow.agent.elastic import DEFAULT_RUNNABLE, ElasticPolicy
from fedflow.core.errors import ConfigError
from fedflow.core.states import JobState

from fedflow.sim.models import QueueDelayModel, RouteSpec, RuntimeModel
from fedflow.sim.network import SizeRule


@dataclass(frozen=True)
class StaticBatch:
    num_nodes: int
    wall_time: int  # minutes
    count: int = 1
    queue: str = "default"
    project: str = "default"


@dataclass
class SiteSpec:
    name: str
    endpoint: str
    cores_per_node: int = 64
    gpus_per_node: float = 0.0
    total_nodes: int | None = None
    queues: dict[str, QueueDelayModel] = field(
        default_factory=lambda: {"default": QueueDelayModel(median=0.0, sigma=0.0)}
    )
    static_batchjobs: list[StaticBatch] = field(default_factory=list)
    elastic: ElasticPolicy | None = None
    job_mode: str = "per-task-spawn"
    idle_timeout: float = 120.0
    transfer_batch_size: int = 32
    max_concurrent_tasks: int = 3
    agent_interval: float = 5.0
    launcher_interval: float = 1.0
    runtime_overrides: dict[str, RuntimeModel] = field(default_factory=dict)


@dataclass(frozen=True)
class Phase:
    rate_per_sec: float
    duration: float
    burst: int = 1


@dataclass
class ClientSpec:
    app: str
    mode: str = "schedule"  # "schedule" | "steady"
    phases: list[Phase] = field(default_factory=list)
    strategy: str = "round-robin"  # "round-robin" | "shortest-backlog"
    sites: list[str] = field(default_factory=list)
    parameters: dict[str, str] = field(default_factory=dict)
    bindings: dict[str, str] = field(default_factory=dict)
    resources: dict = field(default_factory=dict)
    tags: dict[str, str] = field(default_factory=dict)
    max_pending: int = 32  # steady mode: per-site backlog target
    total_jobs: int | None = None
    check_interval: float = 5.0


@dataclass
class FailureSpec:
    kill_launcher_every: float | None = None
    kill_start: float = 120.0
    transfer_stall: tuple[float, float] | None = None


@dataclass
class ReplaySpec:
    """Drives job state transitions directly from sampled stage durations,
    bypassing agents and launchers; used for latency-distribution studies."""

    jobs: int
    stage_in: tuple[float, float]
    run_delay: tuple[float, float]
    run: tuple[float, float]
    stage_out: tuple[float, float]
    submit_spread: float = 0.0


@dataclass
class Scenario:
    name: str
    seed: int
    duration: float
    lease_ttl: float = 30.0
    sweep_interval: float = 5.0
    max_retries: int = 3
    startup_delay: float = 1.0
    dispatch_stagger: float = 0.01
    capacity: float | None = None  # provisioned nodes, for utilization reports
    apps: list[dict] = field(default_factory=list)
    runtimes: dict[str, RuntimeModel] = field(default_factory=dict)
    sites: list[SiteSpec] = field(default_factory=list)
    routes: dict[tuple[str, str], RouteSpec] = field(default_factory=dict)
    size_rules: list[SizeRule] = field(default_factory=list)
    default_file_mb: float = 100.0
    client: ClientSpec | None = None
    failures: FailureSpec = field(default_factory=FailureSpec)
    replay: ReplaySpec | None = None
    stop_when_drained: bool = True

    def site(self, name: str) -> SiteSpec:
        for s in self.sites:
            if s.name == name:
                return s
        raise ConfigError(f"unknown site {name!r}")

    def endpoints(self) -> list[str]:
        seen: dict[str, None] = {}
        for src, dst in self.routes:
            seen.setdefault(src)
            seen.setdefault(dst)
        for s in self.sites:
            seen.setdefault(s.endpoint)
        return list(seen)


def _mean_sd(raw, what: str) -> tuple[float, float]:
    try:
        return float(raw["mean"]), float(raw.get("sd", 0.0))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{what} needs mean (and optional sd)") from exc


def _runtime_map(raw: dict | None) -> dict[str, RuntimeModel]:
    out = {}
    for name, spec in (raw or {}).items():
        mean, sd = _mean_sd(spec, f"runtime model {name!r}")
        out[name] = RuntimeModel(mean=mean, sd=sd)
    return out


def _queue_map(raw: dict | None) -> dict[str, QueueDelayModel]:
    if not raw:
        return {"default": QueueDelayModel(median=0.0, sigma=0.0)}
    out = {}
    for name, spec in raw.items():
        out[name] = QueueDelayModel(
            median=float(spec.get("median", 0.0)), sigma=float(spec.get("sigma", 1.0))
        )
    return out


def _elastic(raw: dict | None) -> ElasticPolicy | None:
    if not raw or raw.get("enabled") is False:
        return None
    states = tuple(
        JobState(s)
        for s in raw.get("runnable_states", [str(s) for s in DEFAULT_RUNNABLE])
    )
    return ElasticPolicy(
        min_nodes=int(raw.get("min_nodes", 1)),
        max_nodes=int(raw.get("max_nodes", 8)),
        max_queued_batchjobs=int(raw.get("max_queued_batchjobs", 4)),
        wall_time=int(raw.get("wall_time", 20)),
        job_mode=raw.get("job_mode", "per-task-spawn"),
        queue=raw.get("queue", "default"),
        project=raw.get("project", "default"),
        runnable_states=states,
        backfill=bool(raw.get("backfill", False)),
        min_walltime=int(raw.get("min_walltime", 10)),
    )


def _site(raw: dict) -> SiteSpec:
    try:
        site = SiteSpec(name=raw["name"], endpoint=raw["endpoint"])
    except KeyError as exc:
        raise ConfigError("each site needs name and endpoint") from exc
    site.cores_per_node = int(raw.get("cores_per_node", site.cores_per_node))
    site.gpus_per_node = float(raw.get("gpus_per_node", site.gpus_per_node))
    if raw.get("total_nodes") is not None:
        site.total_nodes = int(raw["total_nodes"])
    site.queues = _queue_map(raw.get("queues"))
    site.static_batchjobs = [
        StaticBatch(
            num_nodes=int(b["num_nodes"]),
            wall_time=int(b["wall_time"]),
            count=int(b.get("count", 1)),
            queue=b.get("queue", "default"),
            project=b.get("project", "default"),
        )
        for b in raw.get("static_batchjobs", [])
    ]
    site.elastic = _elastic(raw.get("elastic"))
    site.job_mode = raw.get("job_mode", site.job_mode)
    site.idle_timeout = float(raw.get("idle_timeout", site.idle_timeout))
    site.transfer_batch_size = int(raw.get("transfer_batch_size", site.transfer_batch_size))
    site.max_concurrent_tasks = int(raw.get("max_concurrent_tasks", site.max_concurrent_tasks))
    site.agent_interval = float(raw.get("agent_interval", site.agent_interval))
    site.launcher_interval = float(raw.get("launcher_interval", site.launcher_interval))
    site.runtime_overrides = _runtime_map(raw.get("runtime_overrides"))
    return site


def _client(raw: dict | None) -> ClientSpec | None:
    if not raw:
        return None
    try:
        client = ClientSpec(app=raw["app"])
    except KeyError as exc:
        raise ConfigError("client needs an app name") from exc
    client.mode = raw.get("mode", client.mode)
    if client.mode not in ("schedule", "steady"):
        raise ConfigError(f"unknown client mode {client.mode!r}")
    client.phases = [
        Phase(
            rate_per_sec=float(p["rate_per_sec"]),
            duration=float(p["duration"]),
            burst=int(p.get("burst", 1)),
        )
        for p in raw.get("phases", [])
    ]
    client.strategy = raw.get("strategy", client.strategy)
    if client.strategy not in ("round-robin", "shortest-backlog"):
        raise ConfigError(f"unknown strategy {client.strategy!r}")
    client.sites = list(raw.get("sites", []))
    client.parameters = dict(raw.get("parameters", {}))
    client.bindings = dict(raw.get("bindings", {}))
    client.resources = dict(raw.get("resources", {}))
    client.tags = dict(raw.get("tags", {}))
    client.max_pending = int(raw.get("max_pending", client.max_pending))
    if raw.get("total_jobs") is not None:
        client.total_jobs = int(raw["total_jobs"])
    client.check_interval = float(raw.get("check_interval", client.check_interval))
    if client.mode == "schedule" and not client.phases:
        raise ConfigError("schedule-mode client needs at least one phase")
    return client


def _failures(raw: dict | None) -> FailureSpec:
    if not raw:
        return FailureSpec()
    spec = FailureSpec()
    if raw.get("kill_launcher_every") is not None:
        spec.kill_launcher_every = float(raw["kill_launcher_every"])
    spec.kill_start = float(raw.get("kill_start", spec.kill_start))
    stall = raw.get("transfer_stall")
    if stall:
        spec.transfer_stall = (float(stall["start"]), float(stall["end"]))
        if spec.transfer_stall[1] <= spec.transfer_stall[0]:
            raise ConfigError("transfer_stall end must be after start")
    return spec


def _replay(raw: dict | None) -> ReplaySpec | None:
    if not raw:
        return None
    try:
        return ReplaySpec(
            jobs=int(raw["jobs"]),
            stage_in=_mean_sd(raw["stage_in"], "replay.stage_in"),
            run_delay=_mean_sd(raw["run_delay"], "replay.run_delay"),
            run=_mean_sd(raw["run"], "replay.run"),
            stage_out=_mean_sd(raw["stage_out"], "replay.stage_out"),
            submit_spread=float(raw.get("submit_spread", 0.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"replay config incomplete: missing {exc}") from exc


def load_scenario(source: str | Path | dict) -> Scenario:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a mapping")

    try:
        scenario = Scenario(
            name=str(raw["name"]),
            seed=int(raw["seed"]),
            duration=float(raw["duration"]),
        )
    except KeyError as exc:
        raise ConfigError(f"scenario needs {exc} set") from exc

    scenario.lease_ttl = float(raw.get("lease_ttl", scenario.lease_ttl))
    scenario.sweep_interval = float(raw.get("sweep_interval", scenario.sweep_interval))
    scenario.max_retries = int(raw.get("max_retries", scenario.max_retries))
    scenario.startup_delay = float(raw.get("startup_delay", scenario.startup_delay))
    scenario.dispatch_stagger = float(raw.get("dispatch_stagger", scenario.dispatch_stagger))
    if raw.get("capacity") is not None:
        scenario.capacity = float(raw["capacity"])
    scenario.apps = list(raw.get("apps", []))
    scenario.runtimes = _runtime_map(raw.get("runtimes"))
    scenario.sites = [_site(s) for s in raw.get("sites", [])]
    names = [s.name for s in scenario.sites]
    if len(set(names)) != len(names):
        raise ConfigError("site names must be unique")

    for route in raw.get("routes", []):
        try:
            key = (route["src"], route["dst"])
        except KeyError as exc:
            raise ConfigError("each route needs src and dst") from exc
        scenario.routes[key] = RouteSpec(
            rate_mbps=float(route["rate_mbps"]),
            latency=float(route.get("latency", 0.0)),
            per_task_streams=int(route.get("per_task_streams", 4)),
            max_active_tasks=int(route.get("max_active_tasks", 3)),
        )

    scenario.size_rules = [
        SizeRule(suffix=r["suffix"], mb=float(r["mb"]))
        for r in raw.get("file_sizes", [])
    ]
    scenario.default_file_mb = float(raw.get("default_file_mb", scenario.default_file_mb))
    scenario.client = _client(raw.get("client"))
    scenario.failures = _failures(raw.get("failures"))
    scenario.replay = _replay(raw.get("replay"))
    scenario.stop_when_drained = bool(raw.get("stop_when_drained", True))

    if scenario.client:
        targets = scenario.client.sites or names
        for t in targets:
            if t not in names:
                raise ConfigError(f"client targets unknown site {t!r}")
        scenario.client.sites = targets
        app_names = {a.get("name") for a in scenario.apps}
        if scenario.client.app not in app_names:
            raise ConfigError(f"client app {scenario.client.app!r} not defined in apps")
    if scenario.client is None and scenario.replay is None and scenario.sites:
        raise ConfigError("scenario needs a client script or a replay section")
    return scenario
