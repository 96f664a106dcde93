"""Clock injection point.

Every component reads time through a Clock so the simulator can substitute
virtual time; nothing in the platform calls time.time() directly.
"""

from __future__ import annotations

import time
from typing import Protocol, runtime_checkable


@runtime_checkable
class Clock(Protocol):
    def now(self) -> float: ...


class RealClock:
    def now(self) -> float:
        return time.time()


class FixedClock:
    """Manually advanced clock for tests."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> float:
        self._now += dt
        return self._now

    def set(self, t: float) -> None:
        self._now = t
