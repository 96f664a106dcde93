"""Lazy job queries.

A JobQuery is a description of a result set; nothing is fetched until the
query is iterated, and narrowing an existing query never touches the
network. Results are cached per query object until refresh().
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from fedflow.core.records import JobRecord
from fedflow.core.states import JobState


@dataclass
class JobQuery:
    api: object
    state: JobState | None = None
    tags: dict[str, str] = field(default_factory=dict)
    site_id: int | None = None
    ids: list[int] | None = None
    limit: int | None = None
    offset: int = 0
    _cache: list[JobRecord] | None = field(default=None, repr=False)

    def filter(self, **kwargs) -> "JobQuery":
        tags = {**self.tags, **kwargs.pop("tags", {})}
        return dataclasses.replace(self, tags=tags, _cache=None, **kwargs)

    def __iter__(self):
        return iter(self._fetch())

    def __len__(self) -> int:
        return len(self._fetch())

    def all(self) -> list[JobRecord]:
        return list(self._fetch())

    def first(self) -> JobRecord | None:
        rows = self._fetch()
        return rows[0] if rows else None

    def refresh(self) -> "JobQuery":
        self._cache = None
        return self

    def states(self) -> dict[int, JobState]:
        return {job.job_id: job.state for job in self._fetch()}

    def _fetch(self) -> list[JobRecord]:
        if self._cache is None:
            self._cache = self.api.query_jobs(
                state=self.state,
                tags=self.tags or None,
                site_id=self.site_id,
                ids=self.ids,
                limit=self.limit,
                offset=self.offset,
            )
        return self._cache
