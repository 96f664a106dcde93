"""Virtual wide-area transfer fabric.

Each directed route admits at most max_active_tasks concurrent tasks; later
submissions queue FIFO behind the earliest-freeing slot. Completion times
are computed analytically at submission, shifted across any configured
stall windows during which no bytes move. File sizes come from suffix rules
so datasets keep realistic proportions without touching a filesystem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from fedflow.core.errors import ConfigError

from fedflow.sim.models import RouteSpec, task_duration


@dataclass(frozen=True)
class SizeRule:
    suffix: str
    mb: float


@dataclass
class _RouteState:
    spec: RouteSpec
    slots: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.slots:
            self.slots = [0.0] * self.spec.max_active_tasks


class TransferNetwork:
    def __init__(
        self,
        routes: dict[tuple[str, str], RouteSpec],
        stalls: list[tuple[float, float]] | None = None,
        size_rules: list[SizeRule] | None = None,
        default_file_mb: float = 100.0,
    ):
        self._routes = {key: _RouteState(spec) for key, spec in routes.items()}
        self._stalls = sorted(stalls or [])
        self._size_rules = list(size_rules or [])
        self._default_file_mb = default_file_mb

    def route(self, src: str, dst: str) -> RouteSpec:
        state = self._routes.get((src, dst))
        if state is None:
            raise ConfigError(f"no transfer route configured for {src} -> {dst}")
        return state.spec

    def size_mb(self, path: str) -> float:
        for rule in self._size_rules:
            if path.endswith(rule.suffix):
                return rule.mb
        return self._default_file_mb

    def submit(self, src: str, dst: str, file_sizes_mb: list[float], t: float) -> tuple[float, float]:
        """Schedules one task; returns (start, completion) in virtual seconds."""
        state = self._routes.get((src, dst))
        if state is None:
            raise ConfigError(f"no transfer route configured for {src} -> {dst}")
        idx = min(range(len(state.slots)), key=lambda i: state.slots[i])
        start = max(t, state.slots[idx])
        duration = task_duration(state.spec, len(file_sizes_mb), sum(file_sizes_mb))
        completion = self._finish_across_stalls(start, duration)
        state.slots[idx] = completion
        return start, completion

    def _finish_across_stalls(self, start: float, duration: float) -> float:
        """Progress accrues only outside stall windows."""
        t = start
        remaining = duration
        for s, e in self._stalls:
            if e <= t:
                continue
            if t + remaining <= s:
                break
            if t < s:
                remaining -= s - t
            t = e
        return t + remaining
