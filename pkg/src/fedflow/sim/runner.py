"""Scenario execution in virtual time.

The runner boots a real service core, real site agents, and real launchers,
swaps their platform backends for the simulated ones, and drives everything
from a single time-ordered agenda. Each actor is a callback that does one
tick of work at the current virtual instant and reschedules itself; nothing
sleeps and nothing threads, so a scenario's entire event log is a pure
function of its seed.

Two execution styles share the machinery. Live scenarios run the full
pipeline (submission, staging, allocation, launch). Replay scenarios skip
the moving parts and patch job states at sampled times, which isolates the
latency bookkeeping from scheduling effects.
"""

from __future__ import annotations

import dataclasses
import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable

from fedflow.agent.agent import SiteAgent
from fedflow.agent.config import SiteConfig
from fedflow.client.api import DirectApi
from fedflow.client.routing import RoundRobinRouter, ShortestBacklogRouter
from fedflow.core.clock import FixedClock
from fedflow.core.errors import ConfigError
from fedflow.core.records import EventRecord, ResourceSpec
from fedflow.core.states import TERMINAL_STATES, JobState
from fedflow.launcher.launcher import Launcher, LauncherConfig
from fedflow.service.core import JobDraft, JobUpdate, ServiceConfig, ServiceCore

from fedflow.sim.backends import SimAllocation, SimAppRun, SimScheduler, SimTransfer
from fedflow.sim.models import sample_positive_normal
from fedflow.sim.network import TransferNetwork
from fedflow.sim.rng import substream
from fedflow.sim.scenario import ClientSpec, Scenario, SiteSpec, load_scenario

logger = logging.getLogger(__name__)

OPERATOR = "operator"


class _Agenda:
    """Min-heap of (time, seq, callback); seq keeps equal-time pops stable."""

    def __init__(self):
        self._heap: list[tuple[float, int, Callable[[float], None]]] = []
        self._seq = itertools.count()

    def at(self, time: float, fn: Callable[[float], None]) -> None:
        heapq.heappush(self._heap, (time, next(self._seq), fn))

    def pop(self) -> tuple[float, Callable[[float], None]] | None:
        if not self._heap:
            return None
        time, _, fn = heapq.heappop(self._heap)
        return time, fn


@dataclass
class _Facility:
    spec: SiteSpec
    site_id: int
    agent: SiteAgent
    sched: SimScheduler
    apprun: SimAppRun
    launchers: dict[str, Launcher] = field(default_factory=dict)
    dropped: set[str] = field(default_factory=set)


@dataclass
class SimResult:
    scenario: Scenario
    core: ServiceCore
    api: DirectApi
    events: list[EventRecord]
    submitted: int
    submitted_by_site: dict[str, int]
    site_ids: dict[str, int]
    job_site: dict[int, int]
    end_time: float
    allocations: dict[str, list[SimAllocation]] = field(default_factory=dict)

    def site_job_ids(self, name: str) -> set[int]:
        site_id = self.site_ids[name]
        return {j for j, s in self.job_site.items() if s == site_id}


class _Run:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.clock = FixedClock(0.0)
        self.agenda = _Agenda()
        self.core = ServiceCore(
            ServiceConfig(lease_ttl=scenario.lease_ttl, max_retries=scenario.max_retries),
            clock=self.clock,
        )
        self.core.register_user(OPERATOR, "sim")
        self.api = DirectApi(self.core)
        self.api.login(OPERATOR, "sim")
        stalls = [scenario.failures.transfer_stall] if scenario.failures.transfer_stall else None
        self.network = TransferNetwork(
            scenario.routes,
            stalls=stalls,
            size_rules=scenario.size_rules,
            default_file_mb=scenario.default_file_mb,
        )
        self.facilities: list[_Facility] = []
        self.site_ids: dict[str, int] = {}
        self.app_ids: dict[int, dict[str, int]] = {}
        self.submitted = 0
        self.submitted_by_site: dict[str, int] = {}
        self.client_done = scenario.client is None
        self.stopped = False
        self._failure_rng = substream(scenario.seed, "failures")
        self._draft_seq = itertools.count()

    # -- setup ---------------------------------------------------------------

    def _register_site(self, spec: SiteSpec, with_agent: bool) -> int:
        if with_agent:
            sched = SimScheduler(
                self.clock,
                substream(self.scenario.seed, "scheduler", spec.name),
                spec.queues,
                spec.total_nodes,
            )
            xfer = SimTransfer(self.clock, self.network, spec.endpoint)
            cfg = SiteConfig(
                hostname=spec.name,
                path=f"/sim/{spec.name}",
                allowed_endpoints=self.scenario.endpoints(),
                batch_size=spec.transfer_batch_size,
                max_concurrent_tasks=spec.max_concurrent_tasks,
                poll_interval=spec.agent_interval,
                elastic=spec.elastic,
            )
            agent = SiteAgent(
                self.api, cfg, transfer_backend=xfer, scheduler_backend=sched, clock=self.clock
            )
            site_id = agent.site_id
        else:
            agent = sched = None
            site_id = self.api.register_site(spec.name, f"/sim/{spec.name}").site_id
        apps = self.api.sync_apps(site_id, self.scenario.apps)
        self.app_ids[site_id] = {a.name: a.app_id for a in apps}
        self.site_ids[spec.name] = site_id
        self.submitted_by_site[spec.name] = 0
        if with_agent:
            runtimes = {**self.scenario.runtimes, **spec.runtime_overrides}
            apprun = SimAppRun(
                self.clock,
                substream(self.scenario.seed, "apprun", spec.name),
                runtimes,
                startup_delay=self.scenario.startup_delay,
                dispatch_stagger=self.scenario.dispatch_stagger,
            )
            fac = _Facility(
                spec=spec, site_id=site_id, agent=agent, sched=sched, apprun=apprun
            )
            self.facilities.append(fac)
            for batch in spec.static_batchjobs:
                for _ in range(batch.count):
                    self.api.create_batch_job(
                        site_id,
                        num_nodes=batch.num_nodes,
                        wall_time=batch.wall_time,
                        queue=batch.queue,
                        project=batch.project,
                        job_mode=spec.job_mode,
                    )
            self.agenda.at(0.0, self._agent_actor(fac))
        return site_id

    def _setup_live(self) -> None:
        for spec in self.scenario.sites:
            self._register_site(spec, with_agent=True)
        if self.scenario.client:
            self._start_client(self.scenario.client)
        self.agenda.at(0.0, self._sweep)
        if self.scenario.failures.kill_launcher_every:
            self.agenda.at(self.scenario.failures.kill_start, self._failure_tick)
        self.agenda.at(self.scenario.sweep_interval, self._monitor)

    # -- per-site actors -------------------------------------------------------

    def _agent_actor(self, fac: _Facility) -> Callable[[float], None]:
        def tick(now: float) -> None:
            if self.stopped:
                return
            fac.agent.tick()
            self._boot_started_allocations(fac, now)
            self.agenda.at(now + fac.spec.agent_interval, tick)

        return tick

    def _boot_started_allocations(self, fac: _Facility, now: float) -> None:
        rows = {
            bj.scheduler_id: bj
            for bj in self.api.list_batch_jobs(fac.site_id)
            if bj.scheduler_id
        }
        for alloc in fac.sched.live_started():
            if alloc.ref in fac.launchers or alloc.ref in fac.dropped:
                continue
            row = rows.get(alloc.ref)
            if row is None:
                continue
            launcher = Launcher(
                api=self.api,
                site_id=fac.site_id,
                app_run=fac.apprun,
                num_nodes=alloc.num_nodes,
                cores_per_node=fac.spec.cores_per_node,
                gpus_per_node=fac.spec.gpus_per_node,
                batchjob_id=row.batchjob_id,
                config=LauncherConfig(
                    job_mode=row.job_mode,
                    wall_time_minutes=alloc.wall_time,
                    idle_timeout=fac.spec.idle_timeout,
                    tick_interval=fac.spec.launcher_interval,
                    session_ttl=self.scenario.lease_ttl,
                ),
                clock=self.clock,
            )
            launcher.start()
            fac.launchers[alloc.ref] = launcher
            self.agenda.at(now, self._launcher_actor(fac, alloc.ref))

    def _launcher_actor(self, fac: _Facility, ref: str) -> Callable[[float], None]:
        def tick(now: float) -> None:
            launcher = fac.launchers.get(ref)
            if launcher is None or ref in fac.dropped or self.stopped:
                return
            alloc = fac.sched.allocations[ref]
            if alloc.ended(now) and not launcher.finished:
                # scheduler reaped the allocation under the launcher: no
                # goodbye patches, the lease recovers via expiry
                fac.dropped.add(ref)
                fac.launchers.pop(ref, None)
                return
            launcher.tick(now)
            if launcher.finished:
                fac.launchers.pop(ref, None)
                fac.sched.mark_complete(ref)
            else:
                self.agenda.at(now + launcher.config.tick_interval, tick)

        return tick

    # -- shared actors ----------------------------------------------------------

    def _sweep(self, now: float) -> None:
        if self.stopped:
            return
        self.core.expire_stale_sessions(now)
        self.agenda.at(now + self.scenario.sweep_interval, self._sweep)

    def _failure_tick(self, now: float) -> None:
        if self.stopped:
            return
        candidates = []
        for fac in self.facilities:
            for ref, launcher in fac.launchers.items():
                if not launcher.finished and not fac.sched.allocations[ref].ended(now):
                    candidates.append((fac, ref))
        if candidates:
            fac, ref = candidates[int(self._failure_rng.integers(len(candidates)))]
            fac.sched.kill(ref)
            fac.dropped.add(ref)
            fac.launchers.pop(ref, None)
            logger.info("killed launcher %s on %s at t=%.1f", ref, fac.spec.name, now)
        self.agenda.at(now + self.scenario.failures.kill_launcher_every, self._failure_tick)

    def _monitor(self, now: float) -> None:
        if self.stopped:
            return
        if (
            self.scenario.stop_when_drained
            and self.client_done
            and self.submitted > 0
            and self._drained()
        ):
            self.stopped = True
            return
        self.agenda.at(now + self.scenario.sweep_interval, self._monitor)

    def _drained(self) -> bool:
        jobs = self.core.store.jobs
        if len(jobs) < self.submitted:
            return False
        return all(j.state in TERMINAL_STATES for j in jobs.values())

    # -- client ------------------------------------------------------------------

    def _start_client(self, spec: ClientSpec) -> None:
        sids = [self.site_ids[name] for name in spec.sites]
        if spec.strategy == "shortest-backlog":
            self.router = ShortestBacklogRouter(self.api, sids)
        else:
            self.router = RoundRobinRouter(sids)
        if spec.mode == "steady":
            self.agenda.at(0.0, self._steady_tick)
            return
        budget = spec.total_jobs if spec.total_jobs is not None else float("inf")
        planned = 0
        outstanding = [0]  # callbacks not yet executed; last one flips client_done
        start = 0.0
        for phase in spec.phases:
            target = int(round(phase.rate_per_sec * phase.duration))
            interval = phase.burst / phase.rate_per_sec
            emitted = 0
            k = 0
            while emitted < target and planned < budget:
                size = int(min(phase.burst, target - emitted, budget - planned))
                self.agenda.at(start + k * interval, self._burst_cb(spec, size, outstanding))
                outstanding[0] += 1
                emitted += size
                planned += size
                k += 1
            start += phase.duration
        if outstanding[0] == 0:
            self.client_done = True

    def _burst_cb(self, spec: ClientSpec, size: int, outstanding: list[int]):
        def submit(now: float) -> None:
            if not self.stopped:
                self._submit(spec, size)
            outstanding[0] -= 1
            if outstanding[0] == 0:
                self.client_done = True

        return submit

    def _steady_tick(self, now: float) -> None:
        if self.stopped or self.client_done:
            return
        spec = self.scenario.client
        left = (
            spec.total_jobs - self.submitted if spec.total_jobs is not None else None
        )
        for name in spec.sites:
            if left is not None and left <= 0:
                break
            site_id = self.site_ids[name]
            deficit = spec.max_pending - self.api.backlog(site_id)["pending_total"]
            if left is not None:
                deficit = min(deficit, left)
            if deficit > 0:
                self._submit_to_site(spec, site_id, name, deficit)
                if left is not None:
                    left -= deficit
        if spec.total_jobs is not None and self.submitted >= spec.total_jobs:
            self.client_done = True
            return
        self.agenda.at(now + spec.check_interval, self._steady_tick)

    def _submit(self, spec: ClientSpec, size: int) -> None:
        drafts = [self._draft(spec) for _ in range(size)]
        for site_id, assigned in self.router.assign(drafts):
            name = next(n for n, s in self.site_ids.items() if s == site_id)
            app_id = self.app_ids[site_id][spec.app]
            self.api.create_jobs(
                [dataclasses.replace(d, app_id=app_id) for d in assigned]
            )
            self.submitted += len(assigned)
            self.submitted_by_site[name] += len(assigned)

    def _submit_to_site(self, spec: ClientSpec, site_id: int, name: str, size: int) -> None:
        app_id = self.app_ids[site_id][spec.app]
        drafts = [
            dataclasses.replace(self._draft(spec), app_id=app_id) for _ in range(size)
        ]
        self.api.create_jobs(drafts)
        self.submitted += size
        self.submitted_by_site[name] += size

    def _draft(self, spec: ClientSpec) -> JobDraft:
        n = next(self._draft_seq)
        return JobDraft(
            app_id=0,  # rewritten once the router picks a site
            workdir=f"runs/{n:06d}",
            parameters={k: v.format(n=n) for k, v in spec.parameters.items()},
            resources=ResourceSpec(**spec.resources),
            tags=dict(spec.tags),
            transfer_bindings={k: v.format(n=n) for k, v in spec.bindings.items()},
        )

    # -- replay -------------------------------------------------------------------

    def _setup_replay(self) -> None:
        replay = self.scenario.replay
        spec = (
            self.scenario.sites[0]
            if self.scenario.sites
            else SiteSpec(name="replay", endpoint="replay")
        )
        site_id = self._register_site(spec, with_agent=False)
        if not self.scenario.apps:
            raise ConfigError("replay needs one app with an in and an out slot")
        app = self.api.list_apps(site_id)[0]
        directions = {s.direction for s in app.transfer_slots.values()}
        if directions != {"in", "out"}:
            # without both slots the service advances through staging on its
            # own and the scripted timestamps stop being authoritative
            raise ConfigError("replay app must declare in and out transfer slots")
        bindings = {
            name: f"{spec.endpoint}:/replay/{name}.dat"
            for name in app.transfer_slots
        }
        rng = substream(self.scenario.seed, "replay")
        for i in range(replay.jobs):
            offset = (
                float(rng.uniform(0.0, replay.submit_spread))
                if replay.submit_spread > 0
                else 0.0
            )
            durations = [
                sample_positive_normal(mean, sd, rng)
                for mean, sd in (
                    replay.stage_in,
                    replay.run_delay,
                    replay.run,
                    replay.stage_out,
                )
            ]
            draft = JobDraft(app_id=app.app_id, workdir=f"replay/{i:06d}",
                             transfer_bindings=bindings)
            self.agenda.at(offset, self._replay_job_cb(draft, durations))

    def _replay_job_cb(self, draft: JobDraft, durations: list[float]):
        chain = (JobState.STAGED_IN, JobState.RUNNING, JobState.RUN_DONE, JobState.FINISHED)

        def create(now: float) -> None:
            job = self.api.create_jobs([draft])[0]
            self.submitted += 1
            t = now
            for state, duration in zip(chain, durations):
                t += duration
                self.agenda.at(t, self._patch_cb(job.job_id, state))

        return create

    def _patch_cb(self, job_id: int, state: JobState):
        def patch(now: float) -> None:
            _, errors = self.api.update_jobs([JobUpdate(job_id, state, now)])
            if errors:
                logger.error("replay patch failed: %s", errors)

        return patch

    # -- main loop -----------------------------------------------------------------

    def run(self) -> SimResult:
        if self.scenario.replay is not None:
            self._setup_replay()
        else:
            self._setup_live()
        end = 0.0
        while not self.stopped:
            item = self.agenda.pop()
            if item is None:
                break
            time, fn = item
            if time > self.scenario.duration:
                end = self.scenario.duration
                break
            self.clock.set(time)
            end = time
            fn(time)
        return SimResult(
            scenario=self.scenario,
            core=self.core,
            api=self.api,
            events=self.api.query_events(),
            submitted=self.submitted,
            submitted_by_site=dict(self.submitted_by_site),
            site_ids=dict(self.site_ids),
            job_site=dict(self.core.store.job_site),
            end_time=end,
            allocations={
                fac.spec.name: list(fac.sched.allocations.values())
                for fac in self.facilities
            },
        )


def run_scenario(source: Scenario | dict | str) -> SimResult:
    scenario = source if isinstance(source, Scenario) else load_scenario(source)
    return _Run(scenario).run()
