"""End-to-end acceptance checks.

Each test exercises one acceptance criterion against the real service core,
the HTTP layer, or the simulation backend, prints a single PASS/FAIL line
with the measured numbers, and asserts on it. Simulation-backed criteria
share a per-module run cache; fresh reruns happen only where a criterion
demands one (the determinism check).
"""

from __future__ import annotations

import dataclasses
import json
import time
from collections import defaultdict
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest
import yaml
from fastapi.testclient import TestClient

from fedflow.client.api import HttpApi
from fedflow.core.clock import FixedClock
from fedflow.core.errors import ApiError
from fedflow.core.records import ResourceCapacity
from fedflow.core.states import (
    JOB_TRANSITIONS,
    TERMINAL_STATES,
    JobState,
    replay_events,
    validate_transition,
)
from fedflow.metrics.analysis import (
    latency_decomposition,
    littles_law_check,
    trimmed_window,
    utilization_timeline,
)
from fedflow.metrics.events_io import write_events
from fedflow.metrics.report import terminal_census
from fedflow.service.api import create_app
from fedflow.service.core import JobDraft, JobUpdate, ServiceConfig, ServiceCore
from fedflow.sim.runner import run_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"

S = JobState

EXPECTED_EDGES = {
    (S.CREATED, S.AWAITING_PARENTS),
    (S.CREATED, S.READY),
    (S.AWAITING_PARENTS, S.READY),
    (S.AWAITING_PARENTS, S.FAILED),
    (S.READY, S.STAGED_IN),
    (S.STAGED_IN, S.RUNNING),
    (S.RESTART_READY, S.RUNNING),
    (S.RUNNING, S.RUN_DONE),
    (S.RUNNING, S.RUN_ERROR),
    (S.RUNNING, S.RUN_TIMEOUT),
    (S.RUN_DONE, S.FINISHED),
    (S.RUN_ERROR, S.RESTART_READY),
    (S.RUN_ERROR, S.FAILED),
    (S.RUN_TIMEOUT, S.RESTART_READY),
}


def _verdict(capsys, num: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:02d}: {detail}"
    with capsys.disabled():
        print(line, flush=True)
    assert ok, line


def _load_scenario(name: str) -> dict:
    with open(SCENARIOS / f"{name}.yaml") as fh:
        return yaml.safe_load(fh)


def _config(key: str) -> dict:
    """Scenario config for a cache key; derived keys tweak a base file."""
    if key.startswith("batching-"):
        cfg = _load_scenario("batching")
        cfg["sites"][0]["transfer_batch_size"] = int(key.split("-", 1)[1])
        return cfg
    if key == "multisite-solo-slow":
        cfg = _load_scenario("multisite")
        cfg["sites"] = [s for s in cfg["sites"] if s["name"] == "slow"]
        cfg["routes"] = [r for r in cfg["routes"] if r["dst"] == "slow-dtn"]
        cfg["client"]["sites"] = ["slow"]
        return cfg
    if key == "routing-rr":
        cfg = _load_scenario("routing")
        cfg["client"]["strategy"] = "round-robin"
        return cfg
    names = {
        "stress": "stress",
        "replay-profiles": "replay_profiles",
        "littles-open": "littles_law_open",
        "littles-saturated": "littles_law_saturated",
        "multisite": "multisite",
        "routing-sb": "routing",
        "weak-64": "weak_scaling_64",
        "weak-512": "weak_scaling_512",
    }
    return _load_scenario(names[key])


@pytest.fixture(scope="module")
def runs():
    cache: dict[str, object] = {}

    def get(key: str):
        if key not in cache:
            cache[key] = run_scenario(_config(key))
        return cache[key]

    return get


def _staged_count(result, job_ids: set[int] | None, window: tuple[float, float]) -> int:
    w0, w1 = window
    return sum(
        1
        for e in result.events
        if e.to_state == S.STAGED_IN
        and w0 <= e.timestamp < w1
        and (job_ids is None or e.job_id in job_ids)
    )


def _events_by_job(events) -> dict[int, list]:
    by_job: dict[int, list] = defaultdict(list)
    for e in events:
        by_job[e.job_id].append(e)
    for evs in by_job.values():
        evs.sort(key=lambda e: e.event_id)
    return by_job


def _peak_provisioned_nodes(result) -> int:
    """Max nodes simultaneously provisioned, from allocation intervals."""
    edges: list[tuple[float, int]] = []
    for allocs in result.allocations.values():
        for a in allocs:
            if a.start_time is None:
                continue
            end = a.walltime_end()
            if a.killed_at is not None:
                end = min(end, a.killed_at)
            if a.completed_at is not None:
                end = min(end, a.completed_at)
            edges.append((a.start_time, a.num_nodes))
            edges.append((end, -a.num_nodes))
    edges.sort()
    peak = level = 0
    for _, delta in edges:
        level += delta
        peak = max(peak, level)
    return peak


# ---- criterion 1: transition table and random-walk replay -------------------------------------


def test_criterion_01_transition_table_and_random_walk(capsys):
    started = time.monotonic()

    ok_table = JOB_TRANSITIONS == frozenset(EXPECTED_EDGES)
    ok_total = all(
        validate_transition(a, b) == ((a, b) in EXPECTED_EDGES) for a in S for b in S
    )

    clock = FixedClock(0.0)
    svc = ServiceCore(ServiceConfig(signing_key="walk-key", max_retries=3), clock=clock)
    uid = svc.register_user("walker", "walker-pw").user_id
    site = svc.register_site(uid, "walk.host", "/walk")
    app = svc.sync_apps(uid, site.site_id, [{"name": "unit", "command_template": "unit"}])[0]

    rng = np.random.default_rng(20108)
    n_walk = 10_000
    walk = svc.bulk_create_jobs(
        uid, [JobDraft(app_id=app.app_id, workdir=f"walk/{i}") for i in range(n_walk)]
    )
    walk_ids = {j.job_id for j in walk}

    # Slotless jobs land in STAGED_IN on creation. Each round moves every
    # live job one step; RUN_ERROR and RUN_TIMEOUT targets exercise the
    # service's automatic retry and failure follow-ups.
    outcomes = (S.RUN_DONE, S.RUN_ERROR, S.RUN_TIMEOUT)
    err_count = 0
    frontier = set(walk_ids)
    rounds = 0
    while frontier and rounds < 200:
        rounds += 1
        clock.advance(1.0)
        now = clock.now()
        to_start: list[int] = []
        running: list[int] = []
        for jid in list(frontier):
            state = svc.store.jobs[jid].state
            if state in TERMINAL_STATES:
                frontier.discard(jid)
            elif state == S.RUNNING:
                running.append(jid)
            else:
                to_start.append(jid)
        updates = [JobUpdate(jid, S.RUNNING, now) for jid in sorted(to_start)]
        running.sort()
        picks = rng.integers(0, 3, size=len(running))
        updates.extend(
            JobUpdate(jid, outcomes[int(p)], now) for jid, p in zip(running, picks)
        )
        if not updates:
            break
        _, errs = svc.bulk_update_jobs(uid, updates)
        err_count += len(errs)

    # Parent-bearing batches cover the dependency edges deterministically.
    pc_drafts: list[JobDraft] = []
    for i in range(100):
        pc_drafts.append(JobDraft(app_id=app.app_id, workdir=f"pc/p{i}"))
        pc_drafts.append(JobDraft(app_id=app.app_id, workdir=f"pc/c{i}", parent_refs=(2 * i,)))
    rows = svc.bulk_create_jobs(uid, pc_drafts)
    parents = [r.job_id for r in rows[0::2]]
    children = [r.job_id for r in rows[1::2]]
    pc_ids = {r.job_id for r in rows}

    def step(job_ids: list[int], to_state: JobState) -> None:
        nonlocal err_count
        clock.advance(1.0)
        _, errs = svc.bulk_update_jobs(
            uid, [JobUpdate(j, to_state, clock.now()) for j in job_ids]
        )
        err_count += len(errs)

    step(parents[:50], S.RUNNING)
    step(parents[:50], S.RUN_DONE)  # children 0..49: AWAITING_PARENTS -> READY
    for _ in range(4):  # exhaust retries: 4th error fails the parent
        step(parents[50:], S.RUNNING)
        step(parents[50:], S.RUN_ERROR)
    step(children[:50], S.RUNNING)
    step(children[:50], S.RUN_DONE)

    # Illegal edges must be rejected per item without changing the record.
    probes = svc.bulk_create_jobs(
        uid, [JobDraft(app_id=app.app_id, workdir=f"probe/{i}") for i in range(60)]
    )
    clock.advance(1.0)
    rejected = 0
    for rec in probes:
        illegal = [t for t in S if (rec.state, t) not in JOB_TRANSITIONS]
        target = illegal[int(rng.integers(len(illegal)))]
        _, errs = svc.bulk_update_jobs(uid, [JobUpdate(rec.job_id, target, clock.now())])
        if (
            len(errs) == 1
            and errs[0]["code"] == "invalid_transition"
            and svc.store.jobs[rec.job_id].state == rec.state
        ):
            rejected += 1

    events = svc.query_events(uid)
    seen_edges = {(e.from_state, e.to_state) for e in events}
    ok_edges = seen_edges == EXPECTED_EDGES

    mismatches = 0
    for jid, evs in _events_by_job(events).items():
        stub = SimpleNamespace(job_id=jid, state=S.CREATED, last_event_time=None)
        try:
            replay_events(stub, evs)
        except Exception:
            mismatches += 1
            continue
        if stub.state != svc.store.jobs[jid].state:
            mismatches += 1

    terminal = sum(
        1 for jid in walk_ids | pc_ids if svc.store.jobs[jid].state in TERMINAL_STATES
    )
    elapsed = time.monotonic() - started

    ok = (
        ok_table
        and ok_total
        and ok_edges
        and err_count == 0
        and rejected == 60
        and mismatches == 0
        and terminal == len(walk_ids | pc_ids)
        and elapsed < 10.0
    )
    _verdict(
        capsys,
        1,
        ok,
        f"table exact (14 edges), walk {n_walk} jobs / {len(events)} events in {rounds} rounds "
        f"covered {len(seen_edges)}/14 edges, {rejected}/60 illegal rejected, "
        f"{mismatches} replay mismatches, {err_count} update errors, {elapsed:.1f}s < 10s",
    )


# ---- criterion 2: concurrent acquisition and lease recovery -----------------------------------


def test_criterion_02_concurrent_leases_and_expiry(capsys):
    started = time.monotonic()
    clock = FixedClock(0.0)
    svc = ServiceCore(ServiceConfig(signing_key="lease-key", lease_ttl=60.0), clock=clock)
    uid = svc.register_user("fleet", "fleet-pw").user_id
    site = svc.register_site(uid, "fleet.host", "/fleet")
    app = svc.sync_apps(uid, site.site_id, [{"name": "unit", "command_template": "unit"}])[0]

    rng = np.random.default_rng(20211)
    cap = ResourceCapacity(num_nodes=4.0, cores_per_node=8, gpus_per_node=0.0)

    launchers = [
        {"sid": svc.create_session(uid, site.site_id).session_id, "running": set()}
        for _ in range(8)
    ]
    doomed: set[int] = set()
    owner: dict[int, int] = {}
    overlaps = 0
    err_count = 0
    submitted = 0
    forced = 0
    expired_seen = 0

    def sweep_expired(now: float) -> None:
        nonlocal expired_seen
        svc.expire_stale_sessions(now)
        for launcher in launchers:
            sid = launcher["sid"]
            if sid in doomed and sid not in svc.store.sessions:
                expired_seen += 1
                doomed.discard(sid)
                for jid in [j for j, s in owner.items() if s == sid]:
                    del owner[jid]
                launcher["running"].clear()
                launcher["sid"] = svc.create_session(uid, site.site_id).session_id

    def play_round(round_no: int, submit: bool, fail_rate: float) -> None:
        nonlocal overlaps, err_count, submitted
        clock.advance(float(rng.integers(2, 5)))
        now = clock.now()
        if submit and submitted < 2400:
            k = int(rng.integers(0, 4))
            if k:
                svc.bulk_create_jobs(
                    uid,
                    [
                        JobDraft(app_id=app.app_id, workdir=f"j/{submitted + i}")
                        for i in range(k)
                    ],
                )
                submitted += k
        sweep_expired(now)
        order = list(rng.permutation(len(launchers)))
        for idx in order:
            launcher = launchers[idx]
            sid = launcher["sid"]
            if sid in doomed:
                continue  # stopped heartbeating; its running jobs go stale
            svc.heartbeat(uid, sid)
            got = svc.acquire_jobs(uid, sid, int(rng.integers(1, 5)), cap)
            updates = []
            for job in got:
                if job.job_id in owner:
                    overlaps += 1
                owner[job.job_id] = sid
                launcher["running"].add(job.job_id)
                updates.append(JobUpdate(job.job_id, S.RUNNING, now))
            for jid in sorted(launcher["running"] - {u.job_id for u in updates}):
                draw = rng.random()
                if draw < 0.45:
                    final = S.RUN_DONE
                elif draw < 0.45 + fail_rate:
                    final = S.RUN_ERROR
                elif draw < 0.55 + fail_rate:
                    final = S.RUN_TIMEOUT
                else:
                    continue
                updates.append(JobUpdate(jid, final, now))
                launcher["running"].discard(jid)
                del owner[jid]  # every outcome releases the lease
            if updates:
                _, errs = svc.bulk_update_jobs(uid, updates)
                err_count += len(errs)

    for r in range(1000):
        if r % 50 == 25:  # stop one launcher's heartbeats; lease must expire
            alive = [l["sid"] for l in launchers if l["sid"] not in doomed]
            doomed.add(alive[int(rng.integers(len(alive)))])
            forced += 1
        play_round(r, submit=True, fail_rate=0.15)

    def non_terminal() -> int:
        return sum(1 for j in svc.store.jobs.values() if j.state not in TERMINAL_STATES)

    drain_rounds = 0
    while non_terminal() and drain_rounds < 2000:
        drain_rounds += 1
        play_round(1000 + drain_rounds, submit=False, fail_rate=0.10)

    census = terminal_census(svc.query_events(uid))
    terminal_total = census.get("FINISHED", 0) + census.get("FAILED", 0)
    elapsed = time.monotonic() - started

    ok = (
        overlaps == 0
        and err_count == 0
        and forced == 20
        and expired_seen == 20
        and non_terminal() == 0
        and terminal_total == submitted
        and elapsed < 60.0
    )
    _verdict(
        capsys,
        2,
        ok,
        f"8 launchers x 1000 rounds: {overlaps} overlapping acquisitions, "
        f"{expired_seen}/{forced} forced expiries recovered, terminal "
        f"{terminal_total}/{submitted} (FINISHED {census.get('FINISHED', 0)}, "
        f"FAILED {census.get('FAILED', 0)}), {err_count} update errors, {elapsed:.1f}s < 60s",
    )


# ---- criterion 3: elastic scaling under launcher churn ----------------------------------------


def test_criterion_03_elastic_churn_recovery(capsys, runs):
    result = runs("stress")
    census = terminal_census(result.events)
    finished = census.get("FINISHED", 0)
    pending = result.api.backlog(result.site_ids["peak"])["pending_total"]

    timed_out_jobs = 0
    broken = 0
    for jid, evs in _events_by_job(result.events).items():
        hits = [i for i, e in enumerate(evs) if e.to_state == S.RUN_TIMEOUT]
        if not hits:
            continue
        timed_out_jobs += 1
        for i in hits:
            if i + 1 >= len(evs) or evs[i + 1].to_state != S.RESTART_READY:
                broken += 1
            elif not any(e.to_state == S.RUNNING for e in evs[i + 2 :]):
                broken += 1
    lease_expired = len(
        {
            e.job_id
            for e in result.events
            if e.to_state == S.RUN_TIMEOUT and e.data.get("reason") == "lease_expired"
        }
    )
    peak_nodes = _peak_provisioned_nodes(result)

    ok = (
        finished == result.submitted == 3600
        and set(census) == {"FINISHED"}
        and pending == 0
        and timed_out_jobs > 0
        and lease_expired > 0
        and broken == 0
        and peak_nodes == 32
    )
    _verdict(
        capsys,
        3,
        ok,
        f"{finished}/{result.submitted} finished, backlog {pending}, "
        f"{timed_out_jobs} timed-out jobs ({lease_expired} lease expiries) all resumed "
        f"({broken} broken), peak provisioned nodes {peak_nodes}/32",
    )


# ---- criterion 4: latency decomposition against known stage profiles --------------------------


def test_criterion_04_latency_decomposition(capsys, runs):
    result = runs("replay-profiles")
    report = latency_decomposition(result.events)
    n = len(report.durations)

    overhead = float(np.mean([d.overhead for d in report.durations]))
    tts = float(np.mean([d.time_to_solution for d in report.durations]))
    overhead_err = abs(overhead - 34.1) / 34.1
    tts_err = abs(tts - 52.7) / 52.7
    identity_gap = max(
        max(
            abs(d.stage_in + d.run_delay + d.run + d.stage_out - d.time_to_solution),
            abs(d.overhead - (d.time_to_solution - d.run)),
        )
        for d in report.durations
    )

    ok = (
        n >= 1000
        and report.skipped == 0
        and overhead_err <= 0.05
        and tts_err <= 0.05
        and identity_gap <= 1e-9
    )
    _verdict(
        capsys,
        4,
        ok,
        f"{n} jobs: mean overhead {overhead:.2f}s (target 34.1 +-5%, off {overhead_err:.2%}), "
        f"mean time-to-solution {tts:.2f}s (target 52.7 +-5%, off {tts_err:.2%}), "
        f"identity gap {identity_gap:.2e}",
    )


# ---- criterion 5: transfer batch size sweep ----------------------------------------------------


def test_criterion_05_transfer_batching_sweep(capsys, runs):
    rates: dict[int, float] = {}
    for batch in (1, 4, 16, 64, 128):
        result = runs(f"batching-{batch}")
        staged = [e.timestamp for e in result.events if e.to_state == S.STAGED_IN]
        assert len(staged) == 128, f"batch {batch}: only {len(staged)}/128 files arrived"
        rates[batch] = 128.0 / max(staged)

    ok = rates[1] < rates[4] < rates[16] and rates[128] < rates[64]
    _verdict(
        capsys,
        5,
        ok,
        "arrival rate rises 1->16 and drops at 128: "
        + ", ".join(f"B={b}: {rates[b]:.3f} files/s" for b in (1, 4, 16, 64, 128)),
    )


# ---- criterion 6: Little's law at two operating points -----------------------------------------


def test_criterion_06_littles_law_and_utilization(capsys, runs):
    results = {}
    for key, label in (("littles-saturated", "saturated"), ("littles-open", "open")):
        result = runs(key)
        check = littles_law_check(result.events)
        util = utilization_timeline(
            result.events, capacity=32, window=trimmed_window(result.events)
        ).time_average
        results[label] = (check, util)

    sat_check, sat_util = results["saturated"]
    open_check, open_util = results["open"]
    open_dev = abs(open_util - 0.90) / 0.90

    ok = (
        sat_check["relative_gap"] <= 0.05
        and open_check["relative_gap"] <= 0.05
        and sat_util >= 0.95
        and open_dev <= 0.07
    )
    _verdict(
        capsys,
        6,
        ok,
        f"saturated: lambda {sat_check['lambda'] * 60:.2f}/min W {sat_check['W']:.1f}s "
        f"gap {sat_check['relative_gap']:.2%} util {sat_util:.4f} (>=0.95); "
        f"open: gap {open_check['relative_gap']:.2%} util {open_util:.4f} "
        f"({open_dev:.2%} from 0.90, <=7%)",
    )


# ---- criterion 7: multi-site aggregate throughput ----------------------------------------------


def test_criterion_07_multisite_aggregate(capsys, runs):
    window = (300.0, 1440.0)  # 19 minutes of steady operation
    span_min = (window[1] - window[0]) / 60.0

    multi = runs("multisite")
    per_site = {
        name: _staged_count(multi, multi.site_job_ids(name), window) / span_min
        for name in ("slow", "mid", "fast")
    }
    aggregate = sum(per_site.values())

    solo = runs("multisite-solo-slow")
    solo_rate = _staged_count(solo, None, window) / span_min
    ratio = aggregate / solo_rate

    ok = 3.5 <= ratio <= 5.0
    _verdict(
        capsys,
        7,
        ok,
        f"aggregate {aggregate:.1f} datasets/min (slow {per_site['slow']:.1f}, "
        f"mid {per_site['mid']:.1f}, fast {per_site['fast']:.1f}) vs slowest alone "
        f"{solo_rate:.1f}/min: ratio {ratio:.2f} in [3.5, 5.0]",
    )


# ---- criterion 8: backlog-aware routing beats round-robin --------------------------------------


def test_criterion_08_routing_strategies(capsys, runs):
    sb = runs("routing-sb")
    rr = runs("routing-rr")
    window = (0.0, 600.0)

    sb_slow = sb.submitted_by_site["s1"]
    rr_slow = rr.submitted_by_site["s1"]
    sb_fast = _staged_count(sb, sb.site_job_ids("s3"), window)
    rr_fast = _staged_count(rr, rr.site_job_ids("s3"), window)
    gain = sb_fast / rr_fast

    ok = sb_slow < rr_slow and gain >= 1.05
    _verdict(
        capsys,
        8,
        ok,
        f"slowest site got {sb_slow} jobs under shortest-backlog vs {rr_slow} under "
        f"round-robin; fastest site staged {sb_fast} vs {rr_fast} in 10 min "
        f"(+{(gain - 1):.0%}, need >=+5%)",
    )


# ---- criterion 9: weak scaling of the pilot loop ------------------------------------------------


def test_criterion_09_weak_scaling(capsys, runs):
    started = time.monotonic()
    points = {}
    for key, nodes in (("weak-64", 64), ("weak-512", 512)):
        result = runs(key)
        finished = [e.timestamp for e in result.events if e.to_state == S.FINISHED]
        makespan = max(finished)
        points[nodes] = (len(finished), makespan, len(finished) / makespan / nodes)
    wall = time.monotonic() - started

    efficiency = points[512][2] / points[64][2]
    ok = (
        points[64][0] == 640
        and points[512][0] == 5120
        and efficiency >= 0.85
        and wall < 300.0
    )
    _verdict(
        capsys,
        9,
        ok,
        f"64 nodes: {points[64][0]} jobs in {points[64][1]:.0f}s; "
        f"512 nodes: {points[512][0]} jobs in {points[512][1]:.0f}s; "
        f"per-node efficiency {efficiency:.2%} (>=85%), {wall:.1f}s wall < 300s",
    )


# ---- criterion 10: seeded reruns are byte-identical ---------------------------------------------


def test_criterion_10_rerun_determinism(capsys, runs, tmp_path):
    keys = ("stress", "batching-16", "littles-open", "multisite", "routing-sb", "weak-64")
    identical = 0
    total_events = 0
    for key in keys:
        first = runs(key)
        second = run_scenario(_config(key))
        a = tmp_path / f"{key}-a.jsonl"
        b = tmp_path / f"{key}-b.jsonl"
        write_events(a, first.events)
        write_events(b, second.events)
        total_events += len(first.events)
        if a.read_bytes() == b.read_bytes() and first.submitted == second.submitted:
            identical += 1

    ok = identical == len(keys)
    _verdict(
        capsys,
        10,
        ok,
        f"{identical}/{len(keys)} scenarios byte-identical on rerun "
        f"({total_events} events compared)",
    )


# ---- criterion 11: wire schema stability and tenant isolation -----------------------------------


def test_criterion_11_schema_and_isolation(capsys):
    core = ServiceCore(ServiceConfig(signing_key="iso-key"))
    core.register_user("alice", "alice-pw")
    core.register_user("bob", "bob-pw")
    app = create_app(core)

    schema = app.openapi()
    golden = json.loads((GOLDEN / "openapi.json").read_text())
    schema_ok = schema == golden

    client = TestClient(app, raise_server_exceptions=False)
    alice = HttpApi("http://testserver", http=client)
    alice.login("alice", "alice-pw")
    bob = HttpApi("http://testserver", http=client)
    bob.login("bob", "bob-pw")

    a_site = alice.register_site("edge.alice", "/projects/a")
    a_app = alice.sync_apps(a_site.site_id, [{"name": "unit", "command_template": "unit"}])[0]
    a_jobs = alice.create_jobs(
        [JobDraft(app_id=a_app.app_id, workdir=f"a/{i}", tags={"team": "a"}) for i in range(4)]
    )
    b_site = bob.register_site("edge.bob", "/projects/b")

    sites_ok = [s.site_id for s in bob.list_sites()] == [b_site.site_id]
    apps_ok = bob.list_apps() == []
    jobs_ok = bob.query_jobs() == [] and bob.query_jobs(tags={"team": "a"}) == []
    events_ok = bob.query_events() == []

    _, errors = bob.update_jobs(
        [JobUpdate(a_jobs[0].job_id, S.RUNNING, 1.0)]
    )
    update_ok = (
        len(errors) == 1
        and errors[0]["code"] == "not_found"
        and alice.query_jobs(ids=[a_jobs[0].job_id])[0].state == a_jobs[0].state
    )

    with pytest.raises(ApiError) as exc_info:
        bob.create_session(a_site.site_id)
    session_ok = exc_info.value.http_status == 403 and exc_info.value.code == "foreign_site"

    alice_intact = (
        len(alice.query_jobs()) == 4
        and [s.site_id for s in alice.list_sites()] == [a_site.site_id]
    )

    ok = (
        schema_ok
        and sites_ok
        and apps_ok
        and jobs_ok
        and events_ok
        and update_ok
        and session_ok
        and alice_intact
    )
    _verdict(
        capsys,
        11,
        ok,
        f"openapi matches golden ({len(json.dumps(golden))} bytes); cross-tenant "
        f"sites/apps/jobs/events hidden ({sites_ok}/{apps_ok}/{jobs_ok}/{events_ok}), "
        f"foreign update -> not_found ({update_ok}), foreign session -> 403 ({session_ok}), "
        f"owner view intact ({alice_intact})",
    )
