"""Event-log analytics.

Stage durations per job follow the gap definitions: stage_in ends at
STAGED_IN, run starts at the job's last RUNNING event (so retry churn lands
in run_delay, and overhead = stage_in + run_delay + stage_out holds exactly,
with time_to_solution = overhead + run). Utilization counts running tasks;
Little's-law checks trim 10% from each end of the window and use run
duration as W (queueing delay before the run is excluded deliberately).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from fedflow.core.records import EventRecord
from fedflow.core.states import JobState


class EmptyWindow(Exception):
    pass


@dataclass(frozen=True)
class StageDurations:
    job_id: int
    stage_in: float
    run_delay: float
    run: float
    stage_out: float
    time_to_solution: float
    overhead: float


@dataclass(frozen=True)
class LatencyReport:
    durations: list[StageDurations]
    skipped: int
    summary: dict[str, dict[str, float]]


@dataclass(frozen=True)
class UtilizationSeries:
    times: list[float]
    counts: list[int]
    capacity: float
    window: tuple[float, float]
    time_average: float  # fraction of capacity


STAGES = ("stage_in", "run_delay", "run", "stage_out", "time_to_solution", "overhead")


def _ordered(events: list[EventRecord]) -> list[EventRecord]:
    return sorted(events, key=lambda e: (e.timestamp, e.event_id))


def percentile_95(values: list[float]) -> float:
    """Nearest-rank p95 on the empirical distribution."""
    if not values:
        raise EmptyWindow("no samples")
    ranked = sorted(values)
    rank = math.ceil(0.95 * len(ranked))
    return ranked[max(rank - 1, 0)]


def summarize(values: list[float]) -> dict[str, float]:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return {"mean": mean, "sd": math.sqrt(var), "p95": percentile_95(values)}


def latency_decomposition(events: list[EventRecord]) -> LatencyReport:
    by_job: dict[int, dict[str, float]] = {}
    for ev in _ordered(events):
        marks = by_job.setdefault(ev.job_id, {})
        if ev.to_state == JobState.READY and "ready" not in marks:
            marks["ready"] = ev.timestamp
        elif ev.to_state == JobState.STAGED_IN and "staged" not in marks:
            marks["staged"] = ev.timestamp
        elif ev.to_state == JobState.RUNNING:
            marks["running"] = ev.timestamp  # last one wins
        elif ev.to_state == JobState.RUN_DONE:
            marks["run_done"] = ev.timestamp
        elif ev.to_state == JobState.FINISHED:
            marks["finished"] = ev.timestamp

    durations: list[StageDurations] = []
    skipped = 0
    needed = ("ready", "staged", "running", "run_done", "finished")
    for job_id, marks in by_job.items():
        if any(k not in marks for k in needed):
            skipped += 1
            continue
        run = marks["run_done"] - marks["running"]
        tts = marks["finished"] - marks["ready"]
        durations.append(
            StageDurations(
                job_id=job_id,
                stage_in=marks["staged"] - marks["ready"],
                run_delay=marks["running"] - marks["staged"],
                run=run,
                stage_out=marks["finished"] - marks["run_done"],
                time_to_solution=tts,
                overhead=tts - run,
            )
        )

    summary = {}
    if durations:
        for stage in STAGES:
            summary[stage] = summarize([getattr(d, stage) for d in durations])
    return LatencyReport(durations=durations, skipped=skipped, summary=summary)


def throughput_timeline(
    events: list[EventRecord],
    to_state: JobState,
    window: tuple[float, float] | None = None,
) -> list[tuple[float, int]]:
    """Cumulative count of transitions into to_state; derivative gives rates."""
    series: list[tuple[float, int]] = []
    count = 0
    for ev in _ordered(events):
        if ev.to_state != to_state:
            continue
        if window is not None and not (window[0] <= ev.timestamp <= window[1]):
            continue
        count += 1
        series.append((ev.timestamp, count))
    return series


def _running_steps(events: list[EventRecord]) -> list[tuple[float, int]]:
    steps = []
    for ev in _ordered(events):
        if ev.to_state == JobState.RUNNING:
            steps.append((ev.timestamp, +1))
        elif ev.from_state == JobState.RUNNING:
            steps.append((ev.timestamp, -1))
    return steps


def _time_average_count(steps: list[tuple[float, int]], t0: float, t1: float) -> float:
    if t1 <= t0:
        raise EmptyWindow("window has no duration")
    area = 0.0
    level = 0
    prev = t0
    for t, delta in steps:
        if t <= t0:
            level += delta
            continue
        if t >= t1:
            break
        area += level * (t - prev)
        level += delta
        prev = t
    area += level * (t1 - prev)
    return area / (t1 - t0)


def utilization_timeline(
    events: list[EventRecord],
    capacity: float,
    window: tuple[float, float] | None = None,
) -> UtilizationSeries:
    steps = _running_steps(events)
    if window is None:
        if not events:
            raise EmptyWindow("no events")
        ordered = _ordered(events)
        window = (ordered[0].timestamp, ordered[-1].timestamp)
    times: list[float] = []
    counts: list[int] = []
    level = 0
    for t, delta in steps:
        level += delta
        times.append(t)
        counts.append(level)
    avg_count = _time_average_count(steps, window[0], window[1])
    return UtilizationSeries(
        times=times,
        counts=counts,
        capacity=capacity,
        window=window,
        time_average=avg_count / capacity if capacity > 0 else 0.0,
    )


def trimmed_window(events: list[EventRecord], trim: float = 0.1) -> tuple[float, float]:
    if not events:
        raise EmptyWindow("no events")
    ordered = _ordered(events)
    t0, t1 = ordered[0].timestamp, ordered[-1].timestamp
    span = t1 - t0
    if span <= 0:
        raise EmptyWindow("window has no duration")
    return (t0 + trim * span, t1 - trim * span)


def littles_law_check(
    events: list[EventRecord],
    window: tuple[float, float] | None = None,
    trim: float = 0.1,
) -> dict[str, float]:
    if window is None:
        window = trimmed_window(events, trim)
    w0, w1 = window
    if w1 <= w0:
        raise EmptyWindow("window has no duration")

    arrivals = [
        ev
        for ev in events
        if ev.to_state == JobState.STAGED_IN and w0 <= ev.timestamp < w1
    ]
    if not arrivals:
        raise EmptyWindow("no staged-in arrivals in window")
    lam = len(arrivals) / (w1 - w0)

    last_running: dict[int, float] = {}
    run_durations: list[float] = []
    for ev in _ordered(events):
        if ev.to_state == JobState.RUNNING:
            last_running[ev.job_id] = ev.timestamp
        elif ev.to_state == JobState.RUN_DONE and w0 <= ev.timestamp < w1:
            start = last_running.get(ev.job_id)
            if start is not None:
                run_durations.append(ev.timestamp - start)
    if not run_durations:
        raise EmptyWindow("no completed runs in window")
    w_mean = sum(run_durations) / len(run_durations)

    l_observed = _time_average_count(_running_steps(events), w0, w1)
    if l_observed <= 0:
        raise EmptyWindow("nothing ran in window")
    l_expected = lam * w_mean
    return {
        "lambda": lam,
        "W": w_mean,
        "L_expected": l_expected,
        "L_observed": l_observed,
        "relative_gap": abs(l_expected - l_observed) / l_observed,
    }
