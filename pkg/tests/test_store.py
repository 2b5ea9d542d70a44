import random
import threading

import numpy as np
import pytest

from arsec.errors import InvariantViolation, StoreLocked, UnknownPerson
from arsec.model import ConversationEntry, PendingIdentity, new_id
from arsec.store import Store, normalize_export_ids

from conftest import ts


def add_person_with_embedding(store, name, at, vec=None):
    person = store.create_person(name, at)
    media = store.add_media("image", at, f"{at:%Y%m%d-%H%M%S}.jpg", f"img-{name}".encode())
    store.add_embedding(vec if vec is not None else np.zeros(128), media.media_id, person.person_id)
    return person


def make_entry(person_id, at, text="hello there"):
    return ConversationEntry(
        conversation_id=new_id("con"),
        started_at=at,
        slices=[(f"{at:%Y-%m-%dT%H:%M:%S}Z", text)],
        merged_text=text,
        note=[text],
        short_summary=f"{text}.",
        todos=[],
        source_media=[],
        person_id=person_id,
    )


def test_enroll_unknown_person_rejected(store):
    with pytest.raises(UnknownPerson):
        store.add_embedding(np.zeros(128), None, "per-missing")


def test_durability_across_reopen(tmp_path):
    store = Store(tmp_path / "d")
    person = add_person_with_embedding(store, "Josh", ts("2024-06-01 09:00:00"))
    store.close()

    reopened = Store(tmp_path / "d")
    assert reopened.person_exists(person.person_id)
    assert reopened.get_person(person.person_id).display_name == "Josh"
    reopened.close()


def test_rejected_mutation_leaves_no_trace(store):
    person = add_person_with_embedding(store, "Josh", ts("2024-06-01 09:00:00"))
    before = store.export_canonical()
    with pytest.raises(InvariantViolation):
        with store.write():
            store.set_display_name(person.person_id, "Renamed")
            store.set_display_name(person.person_id, "")  # invariant violation
    assert store.export_canonical() == before


def test_concurrent_appends_both_present(store):
    """Two threads appending conversations to one person equals serial replay."""
    person = add_person_with_embedding(store, "Josh", ts("2024-06-01 09:00:00"))
    moments = [ts("2024-06-01 09:05:00"), ts("2024-06-01 09:01:00")]
    entries = [make_entry(person.person_id, at, f"conversation {i}") for i, at in enumerate(moments)]

    threads = [threading.Thread(target=store.add_conversation, args=(e,)) for e in entries]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    stored = store.conversations_for_person(person.person_id)
    assert {c.conversation_id for c in stored} == {e.conversation_id for e in entries}
    assert [c.started_at for c in stored] == sorted(moments)


def test_display_revision_strictly_increases(store):
    person = add_person_with_embedding(store, "Josh", ts("2024-06-01 09:00:00"))
    assert store.display().revision == 0
    r1 = store.update_display(person.person_id, "Josh", "", ts("2024-06-01 09:00:01"))
    r2 = store.update_display(person.person_id, "Josh", "new", ts("2024-06-01 09:00:02"))
    assert (r1.revision, r2.revision) == (1, 2)


def test_embedding_person_link_write_once(store):
    person = add_person_with_embedding(store, "Josh", ts("2024-06-01 09:00:00"))
    other = add_person_with_embedding(store, "Sarah", ts("2024-06-01 09:10:00"))
    emb = store.add_embedding(np.ones(128))
    store.assign_embedding(emb.embedding_id, person.person_id)
    with pytest.raises(InvariantViolation):
        store.assign_embedding(emb.embedding_id, other.person_id)


def test_enroll_cap_evicts_oldest(store):
    person = add_person_with_embedding(store, "Josh", ts("2024-06-01 09:00:00"))
    for i in range(25):
        store.enroll_to_person(person.person_id, np.full(128, float(i)), None, cap=20)
    kept = store.get_person(person.person_id).embeddings
    assert len(kept) == 20
    vectors = [store.get_embedding(e).vector[0] for e in kept]
    assert vectors == [float(i) for i in range(5, 25)]


def test_referential_audit_clean_store(store):
    add_person_with_embedding(store, "Josh", ts("2024-06-01 09:00:00"))
    assert store.audit_referential_integrity() == []


def test_referential_audit_detects_planted_violations(store):
    person = add_person_with_embedding(store, "Josh", ts("2024-06-01 09:00:00"))
    conn = store._conn()  # plant corruption beneath the transaction boundary
    conn.execute("PRAGMA foreign_keys=OFF")
    conn.execute("UPDATE embeddings SET person_id = 'per-ghost'")
    conn.commit()
    conn.execute("PRAGMA foreign_keys=ON")
    problems = store.audit_referential_integrity()
    assert any("per-ghost" in p for p in problems)
    assert any(person.person_id in p and "no embeddings" in p for p in problems)


def test_pending_expiry_boundary(store):
    at = ts("2024-06-01 09:00:00")
    media = store.add_media("image", at, "20240601-090000.jpg", b"x")
    emb = store.add_embedding(np.zeros(128), media.media_id)
    store.add_pending(PendingIdentity(media.media_id, emb.embedding_id, at,
                                      ts("2024-06-01 09:02:00")))
    assert store.expire_pendings(ts("2024-06-01 09:02:00")) == 0  # inclusive bound
    assert store.expire_pendings(ts("2024-06-01 09:02:01")) == 1
    assert store.pendings() == []


def test_exclusive_lock(tmp_path):
    first = Store(tmp_path / "d")
    with pytest.raises(StoreLocked):
        Store(tmp_path / "d")
    first.close()
    second = Store(tmp_path / "d")  # released lock can be retaken
    second.close()


def _random_commits(store, seed):
    rng = random.Random(seed)
    people = []
    base = ts("2024-06-01 09:00:00")
    for i in range(rng.randint(3, 8)):
        at = base.replace(minute=i)
        person = add_person_with_embedding(
            store, f"Person{i}", at, np.full(128, rng.random()))
        people.append(person)
        for j in range(rng.randint(0, 3)):
            store.add_conversation(make_entry(person.person_id, at.replace(second=j + 1),
                                              f"talk {i}.{j}"))
    store.update_display(people[0].person_id, people[0].display_name, "s", base)


@pytest.mark.parametrize("seed", [7, 19, 31])
def test_reload_yields_identical_canonical_state(tmp_path, seed):
    store = Store(tmp_path / "d")
    _random_commits(store, seed=seed)
    exported = store.export_canonical()
    store.close()

    reopened = Store(tmp_path / "d")
    assert reopened.export_canonical() == exported
    reopened.close()


def test_export_import_round_trip(tmp_path):
    source = Store(tmp_path / "a")
    _random_commits(source, seed=11)
    exported = source.export_canonical()
    source.close()

    target = Store(tmp_path / "b")
    target.import_canonical(exported)
    assert target.export_canonical() == exported
    target.close()


def test_normalize_export_ids_stable_for_same_logical_state(tmp_path):
    exports = []
    for name in ("a", "b"):
        store = Store(tmp_path / name)
        _random_commits(store, seed=23)
        exports.append(store.export_canonical())
        store.close()
    assert exports[0] != exports[1]  # fresh uuids
    assert normalize_export_ids(exports[0]) == normalize_export_ids(exports[1])
