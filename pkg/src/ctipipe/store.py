"""Append-only event store: one JSON document per line, UTF-8.

Event and attribute ids come from monotonic counters recovered by scanning
the store on open, so ids stay unique across process restarts. A partial
trailing line (crash during append) is tolerated on load and truncated away
before the next write.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import replace
from pathlib import Path

from .events import Event, document_to_event, event_to_document

log = logging.getLogger(__name__)


class StoreError(Exception):
    pass


class CorruptStoreError(StoreError):
    def __init__(self, path: Path, line_number: int, reason: str):
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {reason}")


def _read_store(path: Path) -> tuple[list[Event], int]:
    """Parse the store file; returns (events, byte length of the committed prefix).

    A line counts as committed only once its newline is on disk, so an
    unterminated tail (torn final write) is skipped with a warning even if it
    happens to parse. A terminated line that fails to parse is corruption.
    """
    blob = path.read_bytes()
    events: list[Event] = []
    valid_bytes = 0
    line_number = 0
    offset = 0
    while True:
        newline = blob.find(b"\n", offset)
        if newline == -1:
            break
        line_bytes = blob[offset:newline]
        line_number += 1
        try:
            line = line_bytes.decode("utf-8")
            if line.strip():
                events.append(document_to_event(json.loads(line)))
        except (UnicodeDecodeError, json.JSONDecodeError, ValueError) as exc:
            raise CorruptStoreError(path, line_number, str(exc)) from exc
        offset = newline + 1
        valid_bytes = offset
    if blob[offset:].strip():
        log.warning("%s: ignoring %d uncommitted trailing bytes", path, len(blob) - offset)
    return events, valid_bytes


def load_all(path: str | Path) -> list[Event]:
    """All events in insertion order; empty or missing file yields []."""
    path = Path(path)
    if not path.exists():
        return []
    events, _ = _read_store(path)
    return events


class EventStore:
    """Single writer for one store file. Concurrent readers can keep using
    :func:`load_all` snapshots; they never see a half-written line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._events: list[Event] = []
        if self.path.exists():
            self._events, valid_bytes = _read_store(self.path)
            if valid_bytes < self.path.stat().st_size:
                log.warning("%s: truncating partial trailing line", self.path)
                with open(self.path, "r+b") as handle:
                    handle.truncate(valid_bytes)
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
        self._next_event_id = max((e.id for e in self._events), default=0) + 1
        self._next_attribute_id = (
            max((a.id for e in self._events for a in e.attributes), default=0) + 1
        )

    def events(self) -> list[Event]:
        return list(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def append(self, event: Event) -> Event:
        """Assign the next ids, persist the event, and return the stored copy."""
        attributes = []
        for attribute in event.attributes:
            attributes.append(replace(attribute, id=self._next_attribute_id))
            self._next_attribute_id += 1
        stored = replace(event, id=self._next_event_id, attributes=attributes)
        self._next_event_id += 1
        line = json.dumps(event_to_document(stored)) + "\n"
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(line)
            handle.flush()
            os.fsync(handle.fileno())
        self._events.append(stored)
        return stored

    def rewrite(self, events: list[Event]) -> None:
        """Atomically replace the store content, keeping the given ids.

        Used by the filtering stage, which rewrites events in place rather
        than appending new ones.
        """
        descriptor, temp_name = tempfile.mkstemp(dir=self.path.parent, prefix=self.path.name)
        try:
            with os.fdopen(descriptor, "w", encoding="utf-8") as handle:
                for event in events:
                    handle.write(json.dumps(event_to_document(event)) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(temp_name, self.path)
        except BaseException:
            if os.path.exists(temp_name):
                os.unlink(temp_name)
            raise
        self._events = list(events)
        self._next_event_id = max((e.id for e in self._events), default=0) + 1
        self._next_attribute_id = (
            max((a.id for e in self._events for a in e.attributes), default=0) + 1
        )
