"""Job lifecycle state machine.

A job moves through staging, execution, and stage-out as a chain of recorded
events. The transition set is a closed table: anything not listed is
rejected, which is what lets every consumer (service, launchers, metrics)
trust a replayed event log. Stage latencies are defined as gaps between
consecutive events, so the states are deliberately fine-grained enough to
measure stage-in, run delay, run, and stage-out separately.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Mapping

from fedflow.core.errors import InvalidTransition, NonMonotonicTimestamp


class JobState(str, Enum):
    CREATED = "CREATED"
    AWAITING_PARENTS = "AWAITING_PARENTS"
    READY = "READY"
    STAGED_IN = "STAGED_IN"
    RUNNING = "RUNNING"
    RUN_DONE = "RUN_DONE"
    FINISHED = "FINISHED"
    RUN_ERROR = "RUN_ERROR"
    RUN_TIMEOUT = "RUN_TIMEOUT"
    RESTART_READY = "RESTART_READY"
    FAILED = "FAILED"

    def __str__(self) -> str:
        return self.value


#: The complete set of legal (from, to) edges. Closed-world: exactly these.
JOB_TRANSITIONS: frozenset[tuple[JobState, JobState]] = frozenset(
    {
        (JobState.CREATED, JobState.AWAITING_PARENTS),
        (JobState.CREATED, JobState.READY),
        (JobState.AWAITING_PARENTS, JobState.READY),
        (JobState.AWAITING_PARENTS, JobState.FAILED),
        (JobState.READY, JobState.STAGED_IN),
        (JobState.STAGED_IN, JobState.RUNNING),
        (JobState.RESTART_READY, JobState.RUNNING),
        (JobState.RUNNING, JobState.RUN_DONE),
        (JobState.RUNNING, JobState.RUN_ERROR),
        (JobState.RUNNING, JobState.RUN_TIMEOUT),
        (JobState.RUN_ERROR, JobState.RESTART_READY),
        (JobState.RUN_ERROR, JobState.FAILED),
        (JobState.RUN_TIMEOUT, JobState.RESTART_READY),
        (JobState.RUN_DONE, JobState.FINISHED),
    }
)

TERMINAL_STATES: frozenset[JobState] = frozenset({JobState.FINISHED, JobState.FAILED})

#: States a launcher session may lease work from.
ACQUIRABLE_STATES: frozenset[JobState] = frozenset({JobState.STAGED_IN, JobState.RESTART_READY})


def validate_transition(from_state: JobState, to_state: JobState) -> bool:
    """Total over all state pairs; True only for edges in the table."""
    return (from_state, to_state) in JOB_TRANSITIONS


def readiness_state(parent_states: Iterable[JobState]) -> JobState:
    """State a job should occupy given its parents' current states.

    FAILED wins over waiting: one failed parent dooms the child regardless
    of the others.
    """
    ready = JobState.READY
    for state in parent_states:
        if state == JobState.FAILED:
            return JobState.FAILED
        if state != JobState.FINISHED:
            ready = JobState.AWAITING_PARENTS
    return ready


def apply_event(job, to_state: JobState, timestamp: float, data: Mapping | None = None):
    """Advance ``job`` to ``to_state`` and return the event that records it.

    The job record is mutated in place (callers hold records exclusively;
    all mutation funnels through here). Raises InvalidTransition for edges
    outside the table and NonMonotonicTimestamp when ``timestamp`` precedes
    the job's latest event.
    """
    from fedflow.core.records import EventRecord

    from_state = job.state
    if not validate_transition(from_state, to_state):
        raise InvalidTransition(
            f"job {job.job_id}: {from_state} -> {to_state} is not a legal transition",
            detail={"job_id": job.job_id, "from_state": str(from_state), "to_state": str(to_state)},
        )
    if job.last_event_time is not None and timestamp < job.last_event_time:
        raise NonMonotonicTimestamp(
            f"job {job.job_id}: event at {timestamp} precedes last event at {job.last_event_time}",
            detail={"job_id": job.job_id},
        )
    job.state = to_state
    job.last_event_time = timestamp
    event = EventRecord(
        event_id=0,
        job_id=job.job_id,
        from_state=from_state,
        to_state=to_state,
        timestamp=timestamp,
        data=dict(data or {}),
    )
    return job, event


def replay_events(job, events: Iterable) -> "object":
    """Rebuild a job's final state by folding its recorded events.

    The log is the source of truth: replaying it through apply_event must
    land on the same final state the live system reached.
    """
    for event in events:
        if job.state != event.from_state:
            raise InvalidTransition(
                f"job {job.job_id}: log expects {event.from_state} but record is {job.state}",
                detail={"job_id": job.job_id},
            )
        apply_event(job, event.to_state, event.timestamp, event.data)
    return job
