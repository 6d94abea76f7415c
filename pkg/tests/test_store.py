"""Versioned store: compare-and-set semantics, event log ordering,
snapshot round-trips, and linearizability under writer contention."""

from __future__ import annotations

import threading

import pytest

from da2fa.errors import Conflict, CorruptSnapshot, UnknownKey
from da2fa.store import Store


def test_fresh_insert_gets_version_one():
    store = Store()
    assert store.compare_and_set("action", "a1", 0, {"x": 1}) == 1


def test_update_bumps_version_by_one():
    store = Store()
    store.compare_and_set("action", "a1", 0, {"x": 1})
    assert store.compare_and_set("action", "a1", 1, {"x": 2}) == 2
    doc, version = store.get("action", "a1")
    assert doc == {"x": 2} and version == 2


def test_stale_writer_conflicts():
    store = Store()
    store.compare_and_set("action", "a1", 0, {"x": 1})
    store.compare_and_set("action", "a1", 1, {"x": 2})
    with pytest.raises(Conflict):
        store.compare_and_set("action", "a1", 1, {"x": 3})


def test_insert_over_existing_conflicts():
    store = Store()
    store.compare_and_set("action", "a1", 0, {"x": 1})
    with pytest.raises(Conflict):
        store.compare_and_set("action", "a1", 0, {"x": 9})


def test_update_of_missing_record_is_unknown_key():
    with pytest.raises(UnknownKey):
        Store().compare_and_set("action", "ghost", 3, {"x": 1})


def test_get_returns_a_copy():
    store = Store()
    store.compare_and_set("action", "a1", 0, {"nested": {"v": 1}})
    doc, _ = store.get("action", "a1")
    doc["nested"]["v"] = 999
    fresh, _ = store.get("action", "a1")
    assert fresh["nested"]["v"] == 1


def test_concurrent_increments_land_exactly_once_each():
    """N threads retry-loop CAS increments; the final count equals N."""
    store = Store()
    store.compare_and_set("counter", "c", 0, {"n": 0})
    conflicts = []

    def bump():
        while True:
            doc, version = store.get("counter", "c")
            try:
                store.compare_and_set("counter", "c", version, {"n": doc["n"] + 1})
                return
            except Conflict:
                conflicts.append(1)

    threads = [threading.Thread(target=bump) for _ in range(32)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    doc, version = store.get("counter", "c")
    assert doc["n"] == 32
    assert version == 33  # 1 insert + 32 successful writes


def test_single_winner_between_two_writers_at_same_version():
    store = Store()
    store.compare_and_set("token", "t", 0, {"used": False})
    outcomes = []

    def consume():
        try:
            store.compare_and_set("token", "t", 1, {"used": True})
            outcomes.append("won")
        except Conflict:
            outcomes.append("lost")

    threads = [threading.Thread(target=consume) for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(outcomes) == ["lost", "won"]


# -- event log ------------------------------------------------------------------


def test_event_sequence_starts_at_one_and_is_gap_free():
    store = Store()
    assert store.append_event("CLICK", at=5) == 1
    assert store.append_event("VERDICT", at=6) == 2
    assert store.append_event("FRAUD_SIGNAL", at=7) == 3
    seqs = [e.seq for e in store.events()]
    assert seqs == [1, 2, 3]


def test_events_since_filters():
    store = Store()
    for i in range(5):
        store.append_event("CLICK", at=i)
    assert [e.seq for e in store.events(since=3)] == [4, 5]


# -- snapshots ----------------------------------------------------------------------


def test_empty_store_round_trip(tmp_path):
    path = tmp_path / "empty.da2fa"
    Store().snapshot(path)
    loaded = Store.load(path)
    assert loaded.list("action") == []
    assert loaded.events() == []


def test_populated_round_trip_preserves_records_versions_and_events(tmp_path):
    store = Store()
    store.compare_and_set("action", "a1", 0, {"state": "REQUESTED"})
    store.compare_and_set("action", "a1", 1, {"state": "CHALLENGE_SENT"})
    store.compare_and_set("device", "d1", 0, {"cookie_token": "tok"})
    store.append_event("CLICK", at=10, subjects={"challenge_id": "c1"},
                       details={"token_kind": "approve"})
    path = tmp_path / "state.da2fa"
    store.snapshot(path)
    loaded = Store.load(path)
    assert loaded.get("action", "a1") == ({"state": "CHALLENGE_SENT"}, 2)
    assert loaded.get("device", "d1") == ({"cookie_token": "tok"}, 1)
    assert loaded.events_text() == store.events_text()


def test_snapshot_is_byte_stable(tmp_path):
    store = Store()
    store.compare_and_set("b", "2", 0, {"k": 2})
    store.compare_and_set("a", "1", 0, {"k": 1})
    first, second = tmp_path / "one", tmp_path / "two"
    store.snapshot(first)
    Store.load(first).snapshot(second)
    assert first.read_bytes() == second.read_bytes()


def test_truncated_snapshot_is_corrupt(tmp_path):
    store = Store()
    store.compare_and_set("action", "a1", 0, {"payload": "x" * 100})
    path = tmp_path / "state.da2fa"
    store.snapshot(path)
    data = path.read_text()
    path.write_text(data[: len(data) - 30])
    with pytest.raises(CorruptSnapshot):
        Store.load(path)


def test_missing_header_is_corrupt(tmp_path):
    path = tmp_path / "bad.da2fa"
    path.write_text('{"key": ["a", "1"], "payload": {}, "version": 1}\n')
    with pytest.raises(CorruptSnapshot):
        Store.load(path)


def test_gapped_event_log_is_corrupt(tmp_path):
    store = Store()
    store.append_event("CLICK", at=1)
    store.append_event("CLICK", at=2)
    path = tmp_path / "state.da2fa"
    store.snapshot(path)
    events_path = tmp_path / "state.da2fa.events"
    lines = events_path.read_text().splitlines()
    events_path.write_text(lines[1] + "\n")  # drop seq 1
    with pytest.raises(CorruptSnapshot):
        Store.load(path)
