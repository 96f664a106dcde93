"""Batch routing across sites.

Round-robin deals each batch into near-equal contiguous chunks so every
site sees steady inflow regardless of backlog. Shortest-backlog sends the
whole batch to the least loaded site, tracking its own in-flight
submissions optimistically between backlog refreshes and falling back to
round-robin when the service cannot be reached.
"""

from __future__ import annotations

from typing import Protocol, Sequence

from fedflow.core.errors import BackendUnavailable
from fedflow.service.core import JobDraft


class Router(Protocol):
    def assign(self, drafts: Sequence[JobDraft]) -> list[tuple[int, list[JobDraft]]]: ...


class RoundRobinRouter:
    def __init__(self, site_ids: Sequence[int], cursor: int = 0):
        if not site_ids:
            raise ValueError("round-robin needs at least one site")
        self.site_ids = list(site_ids)
        self.cursor = cursor % len(self.site_ids)

    def assign(self, drafts: Sequence[JobDraft]) -> list[tuple[int, list[JobDraft]]]:
        n = len(self.site_ids)
        base, extra = divmod(len(drafts), n)
        order = [self.site_ids[(self.cursor + i) % n] for i in range(n)]
        out = []
        start = 0
        for i, site_id in enumerate(order):
            size = base + (1 if i < extra else 0)
            if size:
                out.append((site_id, list(drafts[start : start + size])))
            start += size
        self.cursor = (self.cursor + extra) % n
        return out


class ShortestBacklogRouter:
    """Route each batch to the site with the fewest pending jobs.

    Backlogs are re-read at most once per ``refresh_interval`` calls; between
    reads, each routed batch bumps its target's count so rapid-fire batches
    spread out instead of dogpiling one site.
    """

    def __init__(self, api, site_ids: Sequence[int], refresh_interval: int = 1):
        if not site_ids:
            raise ValueError("shortest-backlog needs at least one site")
        self.api = api
        self.site_ids = list(site_ids)
        self.refresh_interval = max(1, refresh_interval)
        self._fallback = RoundRobinRouter(site_ids)
        self._pending: dict[int, int] = {}
        self._calls_since_refresh = 0

    def assign(self, drafts: Sequence[JobDraft]) -> list[tuple[int, list[JobDraft]]]:
        if not drafts:
            return []
        try:
            self._maybe_refresh()
        except BackendUnavailable:
            return self._fallback.assign(drafts)
        target = min(self.site_ids, key=lambda s: (self._pending[s], s))
        self._pending[target] += len(drafts)
        self._calls_since_refresh += 1
        return [(target, list(drafts))]

    def _maybe_refresh(self) -> None:
        if self._pending and self._calls_since_refresh < self.refresh_interval:
            return
        self._pending = {
            site_id: self.api.backlog(site_id)["pending_total"] for site_id in self.site_ids
        }
        self._calls_since_refresh = 0
