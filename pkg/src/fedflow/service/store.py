"""In-memory record store with an append-only write-ahead log.

Every committed mutation is journaled as one JSON line; restarting from the
journal reproduces the exact store state, which is the whole durability
contract: no committed job, event, or lease is lost across a crash between
API calls. Mutations inside one service operation are buffered and flushed
as a single write so a replayed journal never contains half an operation.
"""

from __future__ import annotations

import heapq
import json
import logging
import os
from collections import defaultdict
from contextlib import contextmanager
from typing import Iterable

from fedflow.core.records import EventRecord, JobRecord
from fedflow.core.serialization import TABLE_CODECS, dump_doc, event_from_doc, event_to_doc
from fedflow.core.states import ACQUIRABLE_STATES, JobState

logger = logging.getLogger(__name__)

TABLES = ("users", "sites", "apps", "jobs", "transfer_items", "batch_jobs", "sessions")


def job_node_footprint(job: JobRecord) -> float:
    """Nodes a job occupies: whole nodes, or a packing fraction of one."""
    r = job.resources
    if r.num_nodes > 1 or r.node_packing_count <= 1:
        return float(r.num_nodes)
    return 1.0 / r.node_packing_count


class Store:
    def __init__(self, wal_path: str | os.PathLike | None = None):
        self.users: dict[int, object] = {}
        self.sites: dict[int, object] = {}
        self.apps: dict[int, object] = {}
        self.jobs: dict[int, JobRecord] = {}
        self.transfer_items: dict[int, object] = {}
        self.batch_jobs: dict[int, object] = {}
        self.sessions: dict[int, object] = {}
        self.events: list[EventRecord] = []

        self._counters: dict[str, int] = defaultdict(int)
        self._wal_path = str(wal_path) if wal_path else None
        self._wal = None
        self._buffer: list[str] | None = None
        self._batch_depth = 0

        self._reset_indexes()
        if self._wal_path:
            self._load_wal()
            self._wal = open(self._wal_path, "a", encoding="utf-8")

    # ---- indexes -------------------------------------------------------------

    def _reset_indexes(self) -> None:
        self.users_by_name: dict[str, int] = {}
        self.sites_by_key: dict[tuple[int, str, str], int] = {}
        self.apps_by_key: dict[tuple[int, str], int] = {}
        self.jobs_by_owner: dict[int, list[int]] = defaultdict(list)
        self.job_owner: dict[int, int] = {}
        self.job_site: dict[int, int] = {}
        self.children: dict[int, list[int]] = defaultdict(list)
        self.items_by_job: dict[int, list[int]] = defaultdict(list)
        self.items_by_site: dict[int, list[int]] = defaultdict(list)
        self.events_by_job: dict[int, list[int]] = defaultdict(list)
        self.site_state_counts: dict[int, dict[JobState, int]] = defaultdict(lambda: defaultdict(int))
        self.site_state_nodes: dict[int, dict[JobState, float]] = defaultdict(lambda: defaultdict(float))
        # site -> state -> heap of (readiness_time, job_id); entries validated lazily
        self.acquire_index: dict[int, dict[JobState, list[tuple[float, int]]]] = defaultdict(
            lambda: {JobState.STAGED_IN: [], JobState.RESTART_READY: []}
        )

    def index_user(self, user) -> None:
        self.users_by_name[user.username] = user.user_id

    def index_site(self, site) -> None:
        self.sites_by_key[(site.owner, site.hostname, site.path)] = site.site_id

    def index_app(self, app) -> None:
        self.apps_by_key[(app.site_id, app.name)] = app.app_id

    def index_new_job(self, job: JobRecord, owner: int, site_id: int) -> None:
        self.jobs_by_owner[owner].append(job.job_id)
        self.job_owner[job.job_id] = owner
        self.job_site[job.job_id] = site_id
        for parent in job.parent_ids:
            self.children[parent].append(job.job_id)
        self.site_state_counts[site_id][job.state] += 1
        self.site_state_nodes[site_id][job.state] += job_node_footprint(job)

    def index_new_item(self, item) -> None:
        self.items_by_job[item.job_id].append(item.item_id)
        self.items_by_site[self.job_site[item.job_id]].append(item.item_id)

    def job_state_moved(self, job: JobRecord, old_state: JobState) -> None:
        site_id = self.job_site[job.job_id]
        footprint = job_node_footprint(job)
        self.site_state_counts[site_id][old_state] -= 1
        self.site_state_counts[site_id][job.state] += 1
        self.site_state_nodes[site_id][old_state] -= footprint
        self.site_state_nodes[site_id][job.state] += footprint
        if job.state in ACQUIRABLE_STATES and job.session_id is None:
            self.push_acquirable(job)

    def push_acquirable(self, job: JobRecord) -> None:
        site_id = self.job_site[job.job_id]
        readiness = job.readiness_time if job.readiness_time is not None else 0.0
        heapq.heappush(self.acquire_index[site_id][job.state], (readiness, job.job_id))

    # ---- ids -----------------------------------------------------------------

    def next_id(self, table: str) -> int:
        self._counters[table] += 1
        return self._counters[table]

    # ---- journal -------------------------------------------------------------

    @contextmanager
    def batch(self):
        """Buffer journal lines so one operation commits as one write."""
        self._batch_depth += 1
        if self._batch_depth == 1:
            self._buffer = []
        try:
            yield
        finally:
            self._batch_depth -= 1
            if self._batch_depth == 0:
                lines, self._buffer = self._buffer, None
                if lines and self._wal:
                    self._wal.write("".join(lines))
                    self._wal.flush()

    def _journal(self, line: str) -> None:
        if self._wal is None and self._buffer is None:
            return
        if self._buffer is not None:
            self._buffer.append(line)
        elif self._wal:
            self._wal.write(line)
            self._wal.flush()

    def upsert(self, table: str, record) -> None:
        records = getattr(self, table)
        key_field = {
            "users": "user_id",
            "sites": "site_id",
            "apps": "app_id",
            "jobs": "job_id",
            "transfer_items": "item_id",
            "batch_jobs": "batchjob_id",
            "sessions": "session_id",
        }[table]
        records[getattr(record, key_field)] = record
        to_doc, _ = TABLE_CODECS[table]
        self._journal(dump_doc({"t": table, "d": to_doc(record)}) + "\n")

    def drop_session(self, session_id: int) -> None:
        self.sessions.pop(session_id, None)
        self._journal(dump_doc({"t": "sessions", "x": session_id}) + "\n")

    def append_event(self, event: EventRecord) -> None:
        self.events.append(event)
        self.events_by_job[event.job_id].append(len(self.events) - 1)
        self._journal(dump_doc({"t": "events", "d": event_to_doc(event)}) + "\n")

    # ---- recovery -------------------------------------------------------------

    def _load_wal(self) -> None:
        if not os.path.exists(self._wal_path):
            return
        with open(self._wal_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                table = entry["t"]
                if table == "events":
                    event = event_from_doc(entry["d"])
                    self.events.append(event)
                elif "x" in entry:
                    self.sessions.pop(entry["x"], None)
                else:
                    _, from_doc = TABLE_CODECS[table]
                    record = from_doc(entry["d"])
                    key = entry["d"][
                        {
                            "users": "user_id",
                            "sites": "site_id",
                            "apps": "app_id",
                            "jobs": "job_id",
                            "transfer_items": "item_id",
                            "batch_jobs": "batchjob_id",
                            "sessions": "session_id",
                        }[table]
                    ]
                    getattr(self, table)[key] = record
        self._rebuild_after_load()
        logger.info("journal replayed: %s", {t: len(getattr(self, t)) for t in TABLES})

    def _rebuild_after_load(self) -> None:
        self._reset_indexes()
        counters = {
            "users": max(self.users, default=0),
            "sites": max(self.sites, default=0),
            "apps": max(self.apps, default=0),
            "jobs": max(self.jobs, default=0),
            "transfer_items": max(self.transfer_items, default=0),
            "batch_jobs": max(self.batch_jobs, default=0),
            "sessions": max(self.sessions, default=0),
            "events": max((e.event_id for e in self.events), default=0),
        }
        self._counters.update(counters)
        for user in self.users.values():
            self.index_user(user)
        for site in self.sites.values():
            self.index_site(site)
        for app in self.apps.values():
            self.index_app(app)
        site_of_app = {app.app_id: app.site_id for app in self.apps.values()}
        owner_of_site = {site.site_id: site.owner for site in self.sites.values()}
        for job in self.jobs.values():
            site_id = site_of_app[job.app_id]
            self.index_new_job(job, owner_of_site[site_id], site_id)
            if job.state in ACQUIRABLE_STATES and job.session_id is None:
                self.push_acquirable(job)
        for item in self.transfer_items.values():
            self.index_new_item(item)
        for idx, event in enumerate(self.events):
            self.events_by_job[event.job_id].append(idx)

    # ---- misc ------------------------------------------------------------------

    def events_for_job(self, job_id: int) -> Iterable[EventRecord]:
        return [self.events[i] for i in self.events_by_job.get(job_id, ())]

    def close(self) -> None:
        if self._wal:
            self._wal.close()
            self._wal = None
