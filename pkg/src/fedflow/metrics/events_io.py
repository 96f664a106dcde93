"""Event-log files: one canonical JSON document per line."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from fedflow.core.records import EventRecord
from fedflow.core.serialization import dump_doc, event_from_doc, event_to_doc

import json


def write_events(path: str | Path, events: Iterable[EventRecord]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(dump_doc(event_to_doc(event)))
            fh.write("\n")
            count += 1
    return count


def read_events(path: str | Path) -> list[EventRecord]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(event_from_doc(json.loads(line)))
    return events
