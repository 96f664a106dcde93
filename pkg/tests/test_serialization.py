"""Canonical document round-trips and timestamp encoding."""

from __future__ import annotations

import json

from fedflow.core import (
    AppSpec,
    BatchJobRecord,
    BatchJobState,
    EventRecord,
    JobRecord,
    JobState,
    ParamSpec,
    ResourceSpec,
    SessionRecord,
    SiteRecord,
    TransferItemRecord,
    TransferSlot,
    TransferState,
    UserRecord,
)
from fedflow.core.serialization import (
    app_from_doc,
    app_to_doc,
    batchjob_from_doc,
    batchjob_to_doc,
    dump_doc,
    event_from_doc,
    event_to_doc,
    item_from_doc,
    item_to_doc,
    job_from_doc,
    job_to_doc,
    session_from_doc,
    session_to_doc,
    site_from_doc,
    site_to_doc,
    ts_to_us,
    us_to_ts,
    user_from_doc,
    user_to_doc,
)


def test_timestamp_microsecond_encoding():
    assert ts_to_us(0.0) == 0
    assert ts_to_us(1.5) == 1_500_000
    assert ts_to_us(1692100000.000001) == 1692100000000001
    assert ts_to_us(None) is None
    assert us_to_ts(1_500_000) == 1.5
    assert us_to_ts(ts_to_us(123.456789)) == 123.456789


def test_dump_doc_is_stable_and_flat():
    line = dump_doc({"b": 2, "a": 1, "tags": {"z": "1", "a": "2"}})
    assert line == '{"a":1,"b":2,"tags":{"a":"2","z":"1"}}'
    assert "\n" not in line


def test_job_round_trip():
    job = JobRecord(
        job_id=7,
        app_id=2,
        workdir="xpcs/A007",
        parameters={"infile": "a.h5"},
        resources=ResourceSpec(num_nodes=1, ranks_per_node=4, threads_per_rank=16,
                               gpus_per_rank=0.5, node_packing_count=1, wall_time_limit=30),
        tags={"experiment": "XPCS", "round": "1"},
        parent_ids=(3, 4),
        state=JobState.STAGED_IN,
        retry_count=1,
        transfer_bindings={"h5_in": "dtn:/d/a.h5"},
        session_id=9,
        readiness_time=100.5,
        last_event_time=101.25,
    )
    doc = job_to_doc(job, internal=True)
    assert doc["readiness_time"] == 100_500_000
    restored = job_from_doc(doc)
    assert restored == job
    wire = job_to_doc(job)
    assert "readiness_time" not in wire and "last_event_time" not in wire
    json.loads(dump_doc(wire))  # valid JSON


def test_event_round_trip_and_data_scrubbing():
    event = EventRecord(
        event_id=11,
        job_id=7,
        from_state=JobState.RUNNING,
        to_state=JobState.RUN_ERROR,
        timestamp=1010.125,
        data={"exit_code": 1, "note": "boom", "obj": object()},
    )
    doc = event_to_doc(event)
    assert doc["timestamp"] == 1_010_125_000
    assert doc["data"]["exit_code"] == 1
    assert isinstance(doc["data"]["obj"], str)
    restored = event_from_doc(doc)
    assert restored.from_state == JobState.RUNNING
    assert restored.timestamp == 1010.125


def test_remaining_record_round_trips():
    user = UserRecord(user_id=1, username="ada", password_salt="s", password_hash="h")
    assert user_from_doc(user_to_doc(user)) == user

    site = SiteRecord(site_id=1, owner=1, hostname="polaris", path="/projects/x", last_refresh=5.5)
    assert site_from_doc(site_to_doc(site)) == site

    app = AppSpec(
        app_id=1, site_id=1, name="corr",
        command_template="corr {{inp}}",
        parameters={"inp": ParamSpec(required=True, default=None)},
        transfer_slots={"h5": TransferSlot(direction="in", required=True, local_path="inp.h5")},
        environment={"K": "V"},
        cleanup_files=("*.h5",),
    )
    assert app_from_doc(app_to_doc(app)) == app

    item = TransferItemRecord(item_id=1, job_id=7, slot="h5", direction="in",
                              local_path="inp.h5", remote_uri="dtn:/d/inp.h5",
                              state=TransferState.ACTIVE, task_ref="task-1",
                              bytes=878_000_000, attempts=2)
    assert item_from_doc(item_to_doc(item)) == item

    bj = BatchJobRecord(batchjob_id=1, site_id=1, num_nodes=8, wall_time=20,
                        queue="debug", project="datascience", job_mode="per-task-spawn",
                        scheduler_id="55301", state=BatchJobState.QUEUED, queued_at=44.0)
    assert batchjob_from_doc(batchjob_to_doc(bj, internal=True)) == bj

    session = SessionRecord(session_id=3, site_id=1, batchjob_id=1, heartbeat=60.0,
                            acquired_job_ids=[4, 5])
    assert session_from_doc(session_to_doc(session)) == session
