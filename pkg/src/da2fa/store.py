"""Versioned in-memory record store with an append-only event log.

compare_and_set is the sole mutation primitive: every write names the
version it expects, so concurrent writers resolve to exactly one winner
per key. Snapshots round-trip the full store state (records and events)
through the canonical line format.
"""

from __future__ import annotations

import copy
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .codec import canonical_json
from .errors import Conflict, CorruptSnapshot, UnknownKey

SNAPSHOT_HEADER = "da2fa-snapshot 1"
EVENTS_SUFFIX = ".events"


class EventKind:
    """Audit-trail event kinds. Stored as plain strings."""

    ACTION_REQUESTED = "ACTION_REQUESTED"
    ACTION_STATE = "ACTION_STATE"
    CHALLENGE_ISSUED = "CHALLENGE_ISSUED"
    CHALLENGE_STATE = "CHALLENGE_STATE"
    MESSAGE_DELIVERED = "MESSAGE_DELIVERED"
    MESSAGE_FORWARDED = "MESSAGE_FORWARDED"
    SIM_JACKED = "SIM_JACKED"
    STATEMENT_POSTED = "STATEMENT_POSTED"
    CLICK = "CLICK"
    VERDICT = "VERDICT"
    ESCALATION_STARTED = "ESCALATION_STARTED"
    ESCALATION_RESULT = "ESCALATION_RESULT"
    APPROVAL_ISSUED = "APPROVAL_ISSUED"
    APPROVAL_SUBMITTED = "APPROVAL_SUBMITTED"
    FRAUD_SIGNAL = "FRAUD_SIGNAL"
    DEVICE_REGISTERED = "DEVICE_REGISTERED"
    ENROLLMENT_TICKET_ISSUED = "ENROLLMENT_TICKET_ISSUED"
    OFFER_CREATED = "OFFER_CREATED"
    OFFER_DECIDED = "OFFER_DECIDED"


@dataclass(frozen=True)
class Event:
    seq: int
    at: int
    kind: str
    subjects: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "seq": self.seq,
            "at": self.at,
            "kind": self.kind,
            "subjects": self.subjects,
            "details": self.details,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Event":
        return cls(
            seq=doc["seq"],
            at=doc["at"],
            kind=doc["kind"],
            subjects=doc["subjects"],
            details=doc["details"],
        )


class Store:
    """Thread-safe record store; payloads are canonical-JSON-able dicts."""

    def __init__(self):
        self._records: dict[tuple[str, str], tuple[dict, int]] = {}
        self._events: list[Event] = []
        self._lock = threading.RLock()

    # -- records --------------------------------------------------------

    def get(self, tag: str, rec_id: str) -> Optional[tuple[dict, int]]:
        with self._lock:
            hit = self._records.get((tag, rec_id))
            if hit is None:
                return None
            payload, version = hit
            return copy.deepcopy(payload), version

    def compare_and_set(self, tag: str, rec_id: str, expected_version: int, payload: dict) -> int:
        """Write iff the stored version equals expected_version.

        expected_version 0 means "insert a fresh record". Returns the new
        version; raises Conflict on a lost race and UnknownKey when a
        nonzero expectation names a record that does not exist.
        """
        key = (tag, rec_id)
        with self._lock:
            current = self._records.get(key)
            if current is None:
                if expected_version != 0:
                    raise UnknownKey(f"{tag}/{rec_id} does not exist")
                self._records[key] = (copy.deepcopy(payload), 1)
                return 1
            _, version = current
            if version != expected_version:
                raise Conflict(f"{tag}/{rec_id} at version {version}, expected {expected_version}")
            self._records[key] = (copy.deepcopy(payload), version + 1)
            return version + 1

    def list(self, tag: str) -> list[tuple[str, dict, int]]:
        with self._lock:
            rows = [
                (rec_id, copy.deepcopy(payload), version)
                for (t, rec_id), (payload, version) in self._records.items()
                if t == tag
            ]
        rows.sort(key=lambda row: row[0])
        return rows

    # -- event log ------------------------------------------------------

    def append_event(self, kind: str, at: int, subjects: dict | None = None,
                     details: dict | None = None) -> int:
        with self._lock:
            seq = len(self._events) + 1
            self._events.append(Event(seq, at, kind, subjects or {}, details or {}))
            return seq

    def events(self, since: int = 0) -> list[Event]:
        with self._lock:
            return [e for e in self._events if e.seq > since]

    def events_text(self) -> str:
        """The full log as canonical line-delimited records."""
        return "".join(canonical_json(e.to_doc()) + "\n" for e in self.events())

    # -- snapshots --------------------------------------------------------

    def snapshot(self, path: str | Path) -> None:
        """Write records to `path` and the event log to `path + ".events"`."""
        path = Path(path)
        with self._lock:
            rows = sorted(self._records.items(), key=lambda kv: kv[0])
            lines = [SNAPSHOT_HEADER]
            for (tag, rec_id), (payload, version) in rows:
                lines.append(canonical_json(
                    {"key": [tag, rec_id], "payload": payload, "version": version}
                ))
            path.write_text("\n".join(lines) + "\n")
            Path(str(path) + EVENTS_SUFFIX).write_text(self.events_text())

    @classmethod
    def load(cls, path: str | Path) -> "Store":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise CorruptSnapshot(str(exc)) from exc
        lines = text.splitlines()
        if not lines or lines[0] != SNAPSHOT_HEADER:
            raise CorruptSnapshot("missing or unsupported snapshot header")
        store = cls()
        for line in lines[1:]:
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                tag, rec_id = doc["key"]
                store._records[(tag, rec_id)] = (doc["payload"], doc["version"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorruptSnapshot(f"bad record line: {line[:80]!r}") from exc
        events_path = Path(str(path) + EVENTS_SUFFIX)
        if events_path.exists():
            for line in events_path.read_text().splitlines():
                if not line.strip():
                    continue
                try:
                    event = Event.from_doc(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CorruptSnapshot(f"bad event line: {line[:80]!r}") from exc
                if event.seq != len(store._events) + 1:
                    raise CorruptSnapshot(f"event log gap at seq {event.seq}")
                store._events.append(event)
        return store
