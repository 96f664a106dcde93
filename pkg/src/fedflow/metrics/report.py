"""Assembled metrics bundle and CSV series output."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from fedflow.core.records import EventRecord
from fedflow.core.states import JobState

from fedflow.metrics.analysis import (
    EmptyWindow,
    latency_decomposition,
    littles_law_check,
    throughput_timeline,
    utilization_timeline,
)


def terminal_census(events: list[EventRecord]) -> dict[str, int]:
    last: dict[int, JobState] = {}
    for ev in sorted(events, key=lambda e: (e.timestamp, e.event_id)):
        last[ev.job_id] = ev.to_state
    census: dict[str, int] = {}
    for state in last.values():
        census[str(state)] = census.get(str(state), 0) + 1
    return census


def build_report(
    events: list[EventRecord],
    capacity: float | None = None,
    trim: float = 0.1,
) -> dict:
    report: dict = {
        "events": len(events),
        "jobs": len({ev.job_id for ev in events}),
        "census": terminal_census(events),
    }
    if not events:
        return report

    ordered = sorted(events, key=lambda e: (e.timestamp, e.event_id))
    t0, t1 = ordered[0].timestamp, ordered[-1].timestamp
    report["window"] = {"begin": t0, "end": t1, "duration": t1 - t0}

    latency = latency_decomposition(events)
    report["latency"] = {
        "complete_jobs": len(latency.durations),
        "skipped": latency.skipped,
        "summary": latency.summary,
    }

    throughput = {}
    for state in (JobState.STAGED_IN, JobState.FINISHED):
        series = throughput_timeline(events, state)
        total = series[-1][1] if series else 0
        rate = total / (t1 - t0) * 60.0 if t1 > t0 else 0.0
        throughput[str(state)] = {"count": total, "per_minute": rate}
    report["throughput"] = throughput

    if capacity:
        util = utilization_timeline(events, capacity)
        report["utilization"] = {
            "capacity": capacity,
            "time_average": util.time_average,
        }
        try:
            report["littles_law"] = littles_law_check(events, trim=trim)
        except EmptyWindow as exc:
            report["littles_law"] = {"error": str(exc)}
    return report


def write_report(path: str | Path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_series_csv(path: str | Path, series: list[tuple[float, float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_seconds", "value"])
        for t, value in series:
            writer.writerow([f"{t:.6f}", value])
