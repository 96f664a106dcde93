from fedflow.metrics.analysis import (
    EmptyWindow,
    LatencyReport,
    StageDurations,
    UtilizationSeries,
    latency_decomposition,
    littles_law_check,
    percentile_95,
    summarize,
    throughput_timeline,
    trimmed_window,
    utilization_timeline,
)
from fedflow.metrics.events_io import read_events, write_events
from fedflow.metrics.report import (
    build_report,
    terminal_census,
    write_report,
    write_series_csv,
)

__all__ = [
    "EmptyWindow",
    "LatencyReport",
    "StageDurations",
    "UtilizationSeries",
    "build_report",
    "latency_decomposition",
    "littles_law_check",
    "percentile_95",
    "read_events",
    "summarize",
    "terminal_census",
    "throughput_timeline",
    "trimmed_window",
    "utilization_timeline",
    "write_events",
    "write_report",
    "write_series_csv",
]
