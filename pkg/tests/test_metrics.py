"""Event-log analytics: stage durations, timelines, Little's law."""

import random

import pytest

from fedflow.core.records import EventRecord
from fedflow.core.states import JobState
from fedflow.metrics import (
    EmptyWindow,
    build_report,
    latency_decomposition,
    littles_law_check,
    percentile_95,
    read_events,
    terminal_census,
    throughput_timeline,
    utilization_timeline,
    write_events,
)

S = JobState
_seq = iter(range(1, 100_000))


def ev(job_id, frm, to, t, data=None):
    return EventRecord(
        event_id=next(_seq),
        job_id=job_id,
        from_state=frm,
        to_state=to,
        timestamp=t,
        data=data or {},
    )


def job_events(job_id, t_ready, stage_in, run_delay, run, stage_out):
    t_staged = t_ready + stage_in
    t_running = t_staged + run_delay
    t_done = t_running + run
    t_finished = t_done + stage_out
    return [
        ev(job_id, S.CREATED, S.READY, t_ready),
        ev(job_id, S.READY, S.STAGED_IN, t_staged),
        ev(job_id, S.STAGED_IN, S.RUNNING, t_running),
        ev(job_id, S.RUNNING, S.RUN_DONE, t_done),
        ev(job_id, S.RUN_DONE, S.FINISHED, t_finished),
    ]


class TestLatency:
    def test_table_row_sums(self):
        events = job_events(1, 0.0, 17.1, 5.3, 18.6, 11.7)
        report = latency_decomposition(events)
        (d,) = report.durations
        assert d.stage_in == pytest.approx(17.1)
        assert d.run_delay == pytest.approx(5.3)
        assert d.run == pytest.approx(18.6)
        assert d.stage_out == pytest.approx(11.7)
        assert d.overhead == pytest.approx(34.1)
        assert d.time_to_solution == pytest.approx(52.7)

    def test_large_dataset_overhead(self):
        events = job_events(1, 0.0, 47.2, 7.4, 89.1, 17.5)
        (d,) = latency_decomposition(events).durations
        assert d.overhead == pytest.approx(47.2 + 7.4 + 17.5)

    def test_overhead_identity_exact_with_retries(self):
        rng = random.Random(99)
        events = []
        for job_id in range(1, 50):
            t = rng.uniform(0, 100)
            events.extend(job_events(job_id, t, rng.uniform(1, 30), rng.uniform(0, 10),
                                     rng.uniform(5, 60), rng.uniform(1, 20)))
            if job_id % 3 == 0:
                # Retry loop before the final RUNNING: insert an earlier
                # attempt; the decomposition must use the last RUNNING.
                events.append(ev(job_id, S.STAGED_IN, S.RUNNING, t + 1))
                events.append(ev(job_id, S.RUNNING, S.RUN_TIMEOUT, t + 2))
                events.append(ev(job_id, S.RUN_TIMEOUT, S.RESTART_READY, t + 2))
        report = latency_decomposition(events)
        assert report.skipped == 0
        for d in report.durations:
            assert d.overhead == pytest.approx(d.stage_in + d.run_delay + d.stage_out)
            assert d.time_to_solution == pytest.approx(d.overhead + d.run)

    def test_incomplete_job_skipped(self):
        events = job_events(1, 0.0, 5, 1, 10, 2) + [ev(2, S.CREATED, S.READY, 0.0)]
        report = latency_decomposition(events)
        assert len(report.durations) == 1
        assert report.skipped == 1

    def test_summary_mean(self):
        events = job_events(1, 0.0, 10, 2, 20, 4) + job_events(2, 50.0, 20, 4, 40, 8)
        summary = latency_decomposition(events).summary
        assert summary["stage_in"]["mean"] == pytest.approx(15.0)
        assert summary["run"]["mean"] == pytest.approx(30.0)


class TestPercentile:
    def test_nearest_rank(self):
        values = list(range(1, 101))  # p95 rank = ceil(95) = 95th value
        assert percentile_95([float(v) for v in values]) == 95.0

    def test_small_sample(self):
        assert percentile_95([3.0]) == 3.0
        assert percentile_95([1.0, 2.0]) == 2.0


class TestThroughput:
    def test_cumulative_counts(self):
        events = job_events(1, 0.0, 5, 1, 10, 2) + job_events(2, 3.0, 5, 1, 10, 2)
        series = throughput_timeline(events, S.FINISHED)
        assert [c for _, c in series] == [1, 2]
        assert series[-1][1] == 2

    def test_empty_log(self):
        assert throughput_timeline([], S.FINISHED) == []

    def test_nondecreasing(self):
        events = []
        for j in range(20):
            events.extend(job_events(j, j * 3.0, 4, 1, 7, 2))
        series = throughput_timeline(events, S.STAGED_IN)
        counts = [c for _, c in series]
        assert counts == sorted(counts) and counts[-1] == 20


class TestUtilization:
    def test_single_job_ten_percent(self):
        events = [
            ev(1, S.STAGED_IN, S.RUNNING, 10.0),
            ev(1, S.RUNNING, S.RUN_DONE, 20.0),
        ]
        util = utilization_timeline(events, capacity=1.0, window=(0.0, 100.0))
        assert util.time_average == pytest.approx(0.10)

    def test_overlapping_jobs_sum(self):
        events = [
            ev(1, S.STAGED_IN, S.RUNNING, 0.0),
            ev(2, S.STAGED_IN, S.RUNNING, 0.0),
            ev(1, S.RUNNING, S.RUN_DONE, 50.0),
            ev(2, S.RUNNING, S.RUN_DONE, 100.0),
        ]
        util = utilization_timeline(events, capacity=2.0, window=(0.0, 100.0))
        assert util.time_average == pytest.approx(0.75)
        assert max(util.counts) == 2

    def test_matches_one_hertz_resample(self):
        rng = random.Random(4)
        events = []
        for job_id in range(1, 80):
            start = rng.uniform(0, 500)
            events.append(ev(job_id, S.STAGED_IN, S.RUNNING, start))
            events.append(ev(job_id, S.RUNNING, S.RUN_DONE, start + rng.uniform(1, 60)))
        window = (50.0, 550.0)
        util = utilization_timeline(events, capacity=8.0, window=window)

        # Brute force: sample running count at 1 Hz midpoints.
        total = 0.0
        steps = int(window[1] - window[0])
        for i in range(steps):
            t = window[0] + i + 0.5
            running = sum(
                1
                for job_id in range(1, 80)
                for e1, e2 in [(events[(job_id - 1) * 2], events[(job_id - 1) * 2 + 1])]
                if e1.timestamp <= t < e2.timestamp
            )
            total += running
        brute = total / steps / 8.0
        assert util.time_average == pytest.approx(brute, abs=0.01)


class TestLittlesLaw:
    def make_steady(self, lam_per_s=0.5, w=10.0, duration=2000.0):
        # Deterministic arrivals every 1/lam, each running exactly w.
        events = []
        job_id = 0
        t = 0.0
        while t < duration:
            job_id += 1
            events.append(ev(job_id, S.READY, S.STAGED_IN, t))
            events.append(ev(job_id, S.STAGED_IN, S.RUNNING, t + 1.0))
            events.append(ev(job_id, S.RUNNING, S.RUN_DONE, t + 1.0 + w))
            t += 1.0 / lam_per_s
        return events

    def test_steady_state_gap_small(self):
        events = self.make_steady()
        result = littles_law_check(events)
        assert result["lambda"] == pytest.approx(0.5, rel=0.02)
        assert result["W"] == pytest.approx(10.0)
        assert result["relative_gap"] <= 0.05

    def test_expected_values_example(self):
        # 19.6/min with 108 s runs: L_expected just over 35.
        events = self.make_steady(lam_per_s=19.6 / 60.0, w=108.0, duration=4000.0)
        result = littles_law_check(events)
        assert result["L_expected"] == pytest.approx(35.3, abs=1.0)

    def test_empty_window_raises(self):
        with pytest.raises(EmptyWindow):
            littles_law_check([ev(1, S.CREATED, S.READY, 0.0),
                               ev(1, S.READY, S.FAILED, 100.0)])


class TestReportAndIo:
    def test_round_trip_events_file(self, tmp_path):
        events = job_events(1, 0.0, 17.1, 5.3, 18.6, 11.7)
        path = tmp_path / "events.jsonl"
        assert write_events(path, events) == 5
        back = read_events(path)
        # Timestamps quantize to wire microseconds on the way through.
        for orig, rt in zip(events, back):
            assert rt.event_id == orig.event_id
            assert rt.job_id == orig.job_id
            assert (rt.from_state, rt.to_state) == (orig.from_state, orig.to_state)
            assert rt.timestamp == pytest.approx(orig.timestamp, abs=1e-6)

    def test_census_and_report(self):
        events = job_events(1, 0.0, 5, 1, 10, 2) + [
            ev(2, S.CREATED, S.READY, 0.0),
            ev(2, S.READY, S.STAGED_IN, 4.0),
        ]
        census = terminal_census(events)
        assert census == {"FINISHED": 1, "STAGED_IN": 1}
        report = build_report(events, capacity=4.0)
        assert report["jobs"] == 2
        assert report["latency"]["complete_jobs"] == 1
        assert report["throughput"]["FINISHED"]["count"] == 1

    def test_empty_report(self):
        report = build_report([])
        assert report["events"] == 0 and report["census"] == {}
