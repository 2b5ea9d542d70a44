"""Durable store for contacts, conversations, media metadata, and jobs.

SQLite in WAL mode. Mutations serialize through a single-writer lock and run
inside one transaction; readers use per-thread connections and see committed
snapshots only. The data directory is protected by an exclusive flock so two
writing processes cannot share it (read-only opens skip the lock).

Canonical export format (``export_canonical``): UTF-8, one line per record,
``<entity-type> <json>`` with JSON keys sorted and no whitespace. Streams are
emitted per entity type in this order: media, person, embedding, conversation,
pending, unmatched, display. Within a type, records are ordered by capture /
creation timestamps and logical names (never by generated ids), so two runs
that performed the same logical work export in the same order.
"""
from __future__ import annotations

import fcntl
import json
import logging
import os
import re
import sqlite3
import threading
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import InvariantViolation, StoreLocked, UnknownMedia, UnknownPerson
from .model import (
    ConversationEntry,
    DisplayState,
    FaceEmbedding,
    MediaObject,
    PendingIdentity,
    PersonRecord,
    check_vector,
    from_iso,
    new_id,
    to_iso,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

_SCHEMA = """
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS media (
    media_id TEXT PRIMARY KEY,
    kind TEXT NOT NULL CHECK (kind IN ('image', 'audio')),
    captured_at TEXT NOT NULL,
    payload_ref TEXT NOT NULL,
    original_filename TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS persons (
    person_id TEXT PRIMARY KEY,
    display_name TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS embeddings (
    embedding_id TEXT PRIMARY KEY,
    person_id TEXT REFERENCES persons(person_id),
    source_media TEXT REFERENCES media(media_id),
    vector TEXT NOT NULL,
    enroll_seq INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_embeddings_person ON embeddings(person_id, enroll_seq);
CREATE TABLE IF NOT EXISTS conversations (
    conversation_id TEXT PRIMARY KEY,
    person_id TEXT REFERENCES persons(person_id),
    started_at TEXT NOT NULL,
    slices TEXT NOT NULL,
    merged_text TEXT NOT NULL,
    note TEXT NOT NULL,
    short_summary TEXT NOT NULL,
    todos TEXT NOT NULL,
    source_media TEXT NOT NULL,
    extraction_failed INTEGER NOT NULL DEFAULT 0
);
CREATE INDEX IF NOT EXISTS idx_conversations_person ON conversations(person_id, started_at);
CREATE TABLE IF NOT EXISTS transcripts (
    media_id TEXT PRIMARY KEY REFERENCES media(media_id),
    slices TEXT NOT NULL,
    merged_text TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS pending_identities (
    image_media_id TEXT PRIMARY KEY REFERENCES media(media_id),
    embedding_id TEXT NOT NULL REFERENCES embeddings(embedding_id),
    created_at TEXT NOT NULL,
    expires_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS unmatched_captures (
    image_media_id TEXT PRIMARY KEY,
    embedding_id TEXT NOT NULL,
    created_at TEXT NOT NULL,
    archived_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS display_state (
    id INTEGER PRIMARY KEY CHECK (id = 1),
    person_id TEXT,
    name TEXT,
    short_summary TEXT,
    updated_at TEXT,
    revision INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS active_target (
    id INTEGER PRIMARY KEY CHECK (id = 1),
    person_id TEXT NOT NULL,
    set_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS handled_media (
    media_id TEXT PRIMARY KEY,
    outcome TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS jobs (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    job_id TEXT UNIQUE NOT NULL,
    kind TEXT NOT NULL,
    media_id TEXT,
    dedupe_key TEXT,
    priority INTEGER NOT NULL,
    status TEXT NOT NULL,
    attempts INTEGER NOT NULL DEFAULT 0,
    enqueued_at TEXT NOT NULL,
    error TEXT
);
CREATE INDEX IF NOT EXISTS idx_jobs_status ON jobs(status, priority, seq);
CREATE TABLE IF NOT EXISTS audit_log (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    at TEXT NOT NULL,
    actor TEXT NOT NULL,
    action TEXT NOT NULL,
    detail TEXT NOT NULL
);
"""

_EXPORT_HEADER = f"arsec-export {SCHEMA_VERSION}"


def _dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


class Store:
    """Single-writer durable store rooted at a data directory."""

    def __init__(self, data_dir: str | Path, exclusive: bool = True):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        (self.data_dir / "media").mkdir(exist_ok=True)
        self._readonly = not exclusive
        self._lock_fh = None
        if exclusive:
            self._lock_fh = open(self.data_dir / ".lock", "w")
            try:
                fcntl.flock(self._lock_fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except OSError:
                self._lock_fh.close()
                self._lock_fh = None
                raise StoreLocked(f"data directory {self.data_dir} is locked by another process")
        self._db_path = self.data_dir / "arsec.db"
        self._local = threading.local()
        self._write_lock = threading.RLock()
        self._write_depth = 0
        if exclusive:
            with self.write() as conn:
                conn.executescript(_SCHEMA)
                conn.execute(
                    "INSERT OR IGNORE INTO meta (key, value) VALUES ('schema_version', ?)",
                    (str(SCHEMA_VERSION),),
                )
                conn.execute(
                    "INSERT OR IGNORE INTO meta (key, value) VALUES ('embedding_generation', '0')"
                )
                conn.execute(
                    "INSERT OR IGNORE INTO display_state (id, person_id, name, short_summary, updated_at, revision)"
                    " VALUES (1, NULL, NULL, NULL, NULL, 0)"
                )

    # -- connections ------------------------------------------------------

    def _conn(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = sqlite3.connect(self._db_path, check_same_thread=False, timeout=30)
            conn.execute("PRAGMA journal_mode=WAL")
            conn.execute("PRAGMA synchronous=FULL")
            conn.execute("PRAGMA foreign_keys=ON")
            conn.row_factory = sqlite3.Row
            self._local.conn = conn
        return conn

    @contextmanager
    def write(self):
        """Single-writer transaction boundary; nests within a thread."""
        if self._readonly:
            raise StoreLocked("store opened read-only")
        with self._write_lock:
            conn = self._conn()
            if self._write_depth == 0:
                conn.execute("BEGIN IMMEDIATE")
            self._write_depth += 1
            try:
                yield conn
            except BaseException:
                self._write_depth -= 1
                if self._write_depth == 0:
                    conn.rollback()
                raise
            else:
                self._write_depth -= 1
                if self._write_depth == 0:
                    conn.commit()

    def close(self) -> None:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            conn.close()
            self._local.conn = None
        if self._lock_fh is not None:
            fcntl.flock(self._lock_fh, fcntl.LOCK_UN)
            self._lock_fh.close()
            self._lock_fh = None

    @classmethod
    def readonly(cls, data_dir: str | Path) -> "Store":
        """Open without the directory lock, for inspection alongside a server."""
        return cls(data_dir, exclusive=False)

    # -- media -------------------------------------------------------------

    def add_media(self, kind: str, captured_at: datetime, original_filename: str,
                  payload: bytes) -> MediaObject:
        media_id = new_id("med")
        ext = original_filename.rsplit(".", 1)[-1].lower()
        payload_ref = f"media/{media_id}.{ext}"
        path = self.data_dir / payload_ref
        with open(path, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        with self.write() as conn:
            conn.execute(
                "INSERT INTO media (media_id, kind, captured_at, payload_ref, original_filename)"
                " VALUES (?, ?, ?, ?, ?)",
                (media_id, kind, to_iso(captured_at), payload_ref, original_filename),
            )
        return MediaObject(media_id, kind, captured_at, payload_ref, original_filename)

    def get_media(self, media_id: str) -> MediaObject | None:
        row = self._conn().execute(
            "SELECT * FROM media WHERE media_id = ?", (media_id,)
        ).fetchone()
        return self._media_from_row(row) if row else None

    def media_exists(self, media_id: str) -> bool:
        return self.get_media(media_id) is not None

    def read_payload(self, media: MediaObject) -> bytes:
        return (self.data_dir / media.payload_ref).read_bytes()

    @staticmethod
    def _media_from_row(row) -> MediaObject:
        return MediaObject(
            media_id=row["media_id"],
            kind=row["kind"],
            captured_at=from_iso(row["captured_at"]),
            payload_ref=row["payload_ref"],
            original_filename=row["original_filename"],
        )

    # -- persons -----------------------------------------------------------

    def create_person(self, display_name: str, created_at: datetime) -> PersonRecord:
        if not display_name:
            raise InvariantViolation("display_name must be non-empty")
        person_id = new_id("per")
        with self.write() as conn:
            conn.execute(
                "INSERT INTO persons (person_id, display_name, created_at) VALUES (?, ?, ?)",
                (person_id, display_name, to_iso(created_at)),
            )
        return PersonRecord(person_id, display_name, created_at)

    def person_exists(self, person_id: str) -> bool:
        row = self._conn().execute(
            "SELECT 1 FROM persons WHERE person_id = ?", (person_id,)
        ).fetchone()
        return row is not None

    def get_person(self, person_id: str) -> PersonRecord | None:
        conn = self._conn()
        row = conn.execute(
            "SELECT * FROM persons WHERE person_id = ?", (person_id,)
        ).fetchone()
        if row is None:
            return None
        emb_ids = [
            r["embedding_id"]
            for r in conn.execute(
                "SELECT embedding_id FROM embeddings WHERE person_id = ? ORDER BY enroll_seq",
                (person_id,),
            )
        ]
        convs = self.conversations_for_person(person_id)
        return PersonRecord(
            person_id=row["person_id"],
            display_name=row["display_name"],
            created_at=from_iso(row["created_at"]),
            embeddings=emb_ids,
            conversations=convs,
        )

    def set_display_name(self, person_id: str, display_name: str) -> None:
        if not display_name:
            raise InvariantViolation("display_name must be non-empty")
        with self.write() as conn:
            cur = conn.execute(
                "UPDATE persons SET display_name = ? WHERE person_id = ?",
                (display_name, person_id),
            )
            if cur.rowcount == 0:
                raise UnknownPerson(person_id)

    def list_person_ids(self) -> list[str]:
        return [r["person_id"] for r in self._conn().execute("SELECT person_id FROM persons")]

    def person_count(self) -> int:
        return self._conn().execute("SELECT COUNT(*) AS n FROM persons").fetchone()["n"]

    # -- embeddings ---------------------------------------------------------

    def _bump_generation(self, conn) -> None:
        conn.execute(
            "UPDATE meta SET value = CAST(value AS INTEGER) + 1 WHERE key = 'embedding_generation'"
        )

    def generation(self) -> int:
        row = self._conn().execute(
            "SELECT value FROM meta WHERE key = 'embedding_generation'"
        ).fetchone()
        return int(row["value"])

    def add_embedding(self, vector, source_media: str | None = None,
                      person_id: str | None = None) -> FaceEmbedding:
        arr = check_vector(vector)
        embedding_id = new_id("emb")
        with self.write() as conn:
            if person_id is not None and not self.person_exists(person_id):
                raise UnknownPerson(person_id)
            if source_media is not None and not self.media_exists(source_media):
                raise UnknownMedia(source_media)
            seq = self._next_enroll_seq(conn)
            conn.execute(
                "INSERT INTO embeddings (embedding_id, person_id, source_media, vector, enroll_seq)"
                " VALUES (?, ?, ?, ?, ?)",
                (embedding_id, person_id, source_media, _dumps(list(map(float, arr))), seq),
            )
            self._bump_generation(conn)
        return FaceEmbedding(embedding_id, arr, source_media, person_id, seq)

    def _next_enroll_seq(self, conn) -> int:
        row = conn.execute("SELECT COALESCE(MAX(enroll_seq), 0) AS m FROM embeddings").fetchone()
        return row["m"] + 1

    def assign_embedding(self, embedding_id: str, person_id: str) -> None:
        """Attach an unowned embedding to a person. The link is write-once."""
        with self.write() as conn:
            if not self.person_exists(person_id):
                raise UnknownPerson(person_id)
            row = conn.execute(
                "SELECT person_id FROM embeddings WHERE embedding_id = ?", (embedding_id,)
            ).fetchone()
            if row is None:
                raise InvariantViolation(f"unknown embedding {embedding_id}")
            if row["person_id"] is not None:
                raise InvariantViolation("embedding person link is immutable once set")
            conn.execute(
                "UPDATE embeddings SET person_id = ? WHERE embedding_id = ?",
                (person_id, embedding_id),
            )
            self._bump_generation(conn)

    def enroll_to_person(self, person_id: str, vector, source_media: str | None,
                         cap: int = 20) -> FaceEmbedding:
        """Add an embedding under a person, evicting the oldest beyond ``cap``."""
        with self.write() as conn:
            if not self.person_exists(person_id):
                raise UnknownPerson(person_id)
            emb = self.add_embedding(vector, source_media, person_id)
            rows = conn.execute(
                "SELECT embedding_id FROM embeddings WHERE person_id = ? ORDER BY enroll_seq",
                (person_id,),
            ).fetchall()
            for row in rows[: max(0, len(rows) - cap)]:
                conn.execute("DELETE FROM embeddings WHERE embedding_id = ?", (row["embedding_id"],))
                self._bump_generation(conn)
        return emb

    def get_embedding(self, embedding_id: str) -> FaceEmbedding | None:
        row = self._conn().execute(
            "SELECT * FROM embeddings WHERE embedding_id = ?", (embedding_id,)
        ).fetchone()
        return self._embedding_from_row(row) if row else None

    def enrolled_embeddings(self) -> list[FaceEmbedding]:
        """All embeddings that belong to a person, in enrollment order."""
        rows = self._conn().execute(
            "SELECT * FROM embeddings WHERE person_id IS NOT NULL ORDER BY enroll_seq"
        ).fetchall()
        return [self._embedding_from_row(r) for r in rows]

    @staticmethod
    def _embedding_from_row(row) -> FaceEmbedding:
        return FaceEmbedding(
            embedding_id=row["embedding_id"],
            vector=np.asarray(json.loads(row["vector"]), dtype=np.float64),
            source_media=row["source_media"],
            person_id=row["person_id"],
            enroll_seq=row["enroll_seq"],
        )

    # -- conversations ------------------------------------------------------

    def add_conversation(self, entry: ConversationEntry) -> None:
        offsets = [ts for ts, _ in entry.slices]
        if offsets != sorted(offsets):
            raise InvariantViolation("transcript slice timestamps must be non-decreasing")
        with self.write() as conn:
            if entry.person_id is not None and not self.person_exists(entry.person_id):
                raise UnknownPerson(entry.person_id)
            conn.execute(
                "INSERT INTO conversations (conversation_id, person_id, started_at, slices,"
                " merged_text, note, short_summary, todos, source_media, extraction_failed)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    entry.conversation_id,
                    entry.person_id,
                    to_iso(entry.started_at),
                    _dumps([[ts, text] for ts, text in entry.slices]),
                    entry.merged_text,
                    _dumps(entry.note),
                    entry.short_summary,
                    _dumps(entry.todos),
                    _dumps(entry.source_media),
                    1 if entry.extraction_failed else 0,
                ),
            )

    @staticmethod
    def _conversation_from_row(row) -> ConversationEntry:
        return ConversationEntry(
            conversation_id=row["conversation_id"],
            started_at=from_iso(row["started_at"]),
            slices=[tuple(pair) for pair in json.loads(row["slices"])],
            merged_text=row["merged_text"],
            note=json.loads(row["note"]),
            short_summary=row["short_summary"],
            todos=json.loads(row["todos"]),
            source_media=json.loads(row["source_media"]),
            person_id=row["person_id"],
            extraction_failed=bool(row["extraction_failed"]),
        )

    def get_conversation(self, conversation_id: str) -> ConversationEntry | None:
        row = self._conn().execute(
            "SELECT * FROM conversations WHERE conversation_id = ?", (conversation_id,)
        ).fetchone()
        return self._conversation_from_row(row) if row else None

    def conversations_for_person(self, person_id: str) -> list[ConversationEntry]:
        rows = self._conn().execute(
            "SELECT * FROM conversations WHERE person_id = ? ORDER BY started_at, conversation_id",
            (person_id,),
        ).fetchall()
        return [self._conversation_from_row(r) for r in rows]

    def orphan_conversations(self) -> list[ConversationEntry]:
        rows = self._conn().execute(
            "SELECT * FROM conversations WHERE person_id IS NULL ORDER BY started_at, conversation_id"
        ).fetchall()
        return [self._conversation_from_row(r) for r in rows]

    def attach_orphan(self, conversation_id: str, person_id: str) -> None:
        with self.write() as conn:
            if not self.person_exists(person_id):
                raise UnknownPerson(person_id)
            cur = conn.execute(
                "UPDATE conversations SET person_id = ? WHERE conversation_id = ? AND person_id IS NULL",
                (person_id, conversation_id),
            )
            if cur.rowcount == 0:
                raise InvariantViolation(f"no orphan conversation {conversation_id}")

    def update_conversation(self, conversation_id: str, *, note: list[str] | None = None,
                            short_summary: str | None = None,
                            todos: list[str] | None = None) -> None:
        with self.write() as conn:
            row = conn.execute(
                "SELECT 1 FROM conversations WHERE conversation_id = ?", (conversation_id,)
            ).fetchone()
            if row is None:
                raise InvariantViolation(f"unknown conversation {conversation_id}")
            if note is not None:
                conn.execute(
                    "UPDATE conversations SET note = ? WHERE conversation_id = ?",
                    (_dumps(note), conversation_id),
                )
            if short_summary is not None:
                conn.execute(
                    "UPDATE conversations SET short_summary = ? WHERE conversation_id = ?",
                    (short_summary, conversation_id),
                )
            if todos is not None:
                conn.execute(
                    "UPDATE conversations SET todos = ? WHERE conversation_id = ?",
                    (_dumps(todos), conversation_id),
                )

    def thumbnail_media(self, person_id: str) -> str | None:
        """Latest image capture among the person's enrolled embeddings."""
        row = self._conn().execute(
            "SELECT m.media_id FROM embeddings e JOIN media m ON e.source_media = m.media_id"
            " WHERE e.person_id = ? AND m.kind = 'image'"
            " ORDER BY m.captured_at DESC, m.media_id DESC LIMIT 1",
            (person_id,),
        ).fetchone()
        return row["media_id"] if row else None

    def latest_summary_for_person(self, person_id: str) -> str:
        row = self._conn().execute(
            "SELECT short_summary FROM conversations WHERE person_id = ?"
            " ORDER BY started_at DESC, conversation_id DESC LIMIT 1",
            (person_id,),
        ).fetchone()
        return row["short_summary"] if row else ""

    # -- transcripts (pipeline stage output, keyed by media) ----------------

    def upsert_transcript(self, media_id: str, slices: list[tuple[str, str]],
                          merged_text: str) -> None:
        with self.write() as conn:
            conn.execute(
                "INSERT INTO transcripts (media_id, slices, merged_text) VALUES (?, ?, ?)"
                " ON CONFLICT(media_id) DO UPDATE SET slices = excluded.slices,"
                " merged_text = excluded.merged_text",
                (media_id, _dumps([[ts, t] for ts, t in slices]), merged_text),
            )

    def get_transcript(self, media_id: str) -> tuple[list[tuple[str, str]], str] | None:
        row = self._conn().execute(
            "SELECT slices, merged_text FROM transcripts WHERE media_id = ?", (media_id,)
        ).fetchone()
        if row is None:
            return None
        return [tuple(p) for p in json.loads(row["slices"])], row["merged_text"]

    # -- pending identities --------------------------------------------------

    def add_pending(self, pending: PendingIdentity) -> None:
        with self.write() as conn:
            conn.execute(
                "INSERT INTO pending_identities (image_media_id, embedding_id, created_at, expires_at)"
                " VALUES (?, ?, ?, ?)",
                (
                    pending.image_media_id,
                    pending.embedding_id,
                    to_iso(pending.created_at),
                    to_iso(pending.expires_at),
                ),
            )

    def pendings(self) -> list[PendingIdentity]:
        rows = self._conn().execute(
            "SELECT * FROM pending_identities ORDER BY created_at, image_media_id"
        ).fetchall()
        return [
            PendingIdentity(
                image_media_id=r["image_media_id"],
                embedding_id=r["embedding_id"],
                created_at=from_iso(r["created_at"]),
                expires_at=from_iso(r["expires_at"]),
            )
            for r in rows
        ]

    def oldest_consumable_pending(self, audio_at: datetime) -> PendingIdentity | None:
        """Oldest pending whose capture precedes the audio and has not expired at it."""
        for pending in self.pendings():
            if pending.created_at <= audio_at <= pending.expires_at:
                return pending
        return None

    def consume_pending(self, image_media_id: str) -> None:
        with self.write() as conn:
            conn.execute(
                "DELETE FROM pending_identities WHERE image_media_id = ?", (image_media_id,)
            )

    def expire_pendings(self, now: datetime) -> int:
        """Archive pendings with expires_at strictly before ``now``."""
        with self.write() as conn:
            rows = conn.execute(
                "SELECT * FROM pending_identities WHERE expires_at < ?", (to_iso(now),)
            ).fetchall()
            for row in rows:
                conn.execute(
                    "INSERT INTO unmatched_captures (image_media_id, embedding_id, created_at, archived_at)"
                    " VALUES (?, ?, ?, ?)",
                    (row["image_media_id"], row["embedding_id"], row["created_at"], to_iso(now)),
                )
                conn.execute(
                    "DELETE FROM pending_identities WHERE image_media_id = ?",
                    (row["image_media_id"],),
                )
            return len(rows)

    # -- display state + active target ---------------------------------------

    def display(self) -> DisplayState:
        row = self._conn().execute("SELECT * FROM display_state WHERE id = 1").fetchone()
        return DisplayState(
            person_id=row["person_id"],
            name=row["name"],
            short_summary=row["short_summary"],
            updated_at=from_iso(row["updated_at"]) if row["updated_at"] else None,
            revision=row["revision"],
        )

    def update_display(self, person_id: str | None, name: str, short_summary: str,
                       at: datetime) -> DisplayState:
        with self.write() as conn:
            if person_id is not None and not self.person_exists(person_id):
                raise UnknownPerson(person_id)
            conn.execute(
                "UPDATE display_state SET person_id = ?, name = ?, short_summary = ?,"
                " updated_at = ?, revision = revision + 1 WHERE id = 1",
                (person_id, name, short_summary, to_iso(at)),
            )
        return self.display()

    def set_active_target(self, person_id: str, at: datetime) -> None:
        with self.write() as conn:
            conn.execute(
                "INSERT INTO active_target (id, person_id, set_at) VALUES (1, ?, ?)"
                " ON CONFLICT(id) DO UPDATE SET person_id = excluded.person_id, set_at = excluded.set_at",
                (person_id, to_iso(at)),
            )

    def active_target(self) -> tuple[str, datetime] | None:
        row = self._conn().execute("SELECT * FROM active_target WHERE id = 1").fetchone()
        if row is None:
            return None
        return row["person_id"], from_iso(row["set_at"])

    # -- idempotency markers ---------------------------------------------------

    def handled_outcome(self, media_id: str) -> str | None:
        row = self._conn().execute(
            "SELECT outcome FROM handled_media WHERE media_id = ?", (media_id,)
        ).fetchone()
        return row["outcome"] if row else None

    def mark_handled(self, media_id: str, outcome: str) -> None:
        with self.write() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO handled_media (media_id, outcome) VALUES (?, ?)",
                (media_id, outcome),
            )

    # -- audit log ---------------------------------------------------------------

    def append_audit(self, actor: str, action: str, detail: str) -> None:
        with self.write() as conn:
            conn.execute(
                "INSERT INTO audit_log (at, actor, action, detail) VALUES (?, ?, ?, ?)",
                (to_iso(datetime.now().astimezone()), actor, action, detail),
            )

    def audit_entries(self) -> list[dict]:
        rows = self._conn().execute("SELECT * FROM audit_log ORDER BY seq").fetchall()
        return [dict(r) for r in rows]

    # -- integrity audit -----------------------------------------------------------

    def audit_referential_integrity(self) -> list[str]:
        """Full-store audit; returns human-readable violations (empty == healthy)."""
        conn = self._conn()
        problems: list[str] = []
        for row in conn.execute(
            "SELECT embedding_id, person_id FROM embeddings WHERE person_id IS NOT NULL"
            " AND person_id NOT IN (SELECT person_id FROM persons)"
        ):
            problems.append(f"embedding {row['embedding_id']} references missing person {row['person_id']}")
        for row in conn.execute(
            "SELECT conversation_id, person_id FROM conversations WHERE person_id IS NOT NULL"
            " AND person_id NOT IN (SELECT person_id FROM persons)"
        ):
            problems.append(f"conversation {row['conversation_id']} references missing person {row['person_id']}")
        display = self.display()
        if display.person_id is not None and not self.person_exists(display.person_id):
            problems.append(f"display references missing person {display.person_id}")
        for row in conn.execute(
            "SELECT image_media_id, embedding_id FROM pending_identities WHERE embedding_id NOT IN"
            " (SELECT embedding_id FROM embeddings)"
        ):
            problems.append(f"pending {row['image_media_id']} references missing embedding {row['embedding_id']}")
        for row in conn.execute("SELECT person_id FROM persons"):
            n = conn.execute(
                "SELECT COUNT(*) AS n FROM embeddings WHERE person_id = ?", (row["person_id"],)
            ).fetchone()["n"]
            if n == 0:
                problems.append(f"person {row['person_id']} has no embeddings")
        return problems

    # -- canonical export / import ---------------------------------------------------

    def export_canonical(self) -> str:
        """Serialize the logical state; see module docstring for the format."""
        conn = self._conn()
        lines = [_EXPORT_HEADER]

        media_rows = conn.execute("SELECT * FROM media").fetchall()
        media_key = {}
        for r in media_rows:
            media_key[r["media_id"]] = (r["captured_at"], r["original_filename"], r["kind"], r["media_id"])
        for r in sorted(media_rows, key=lambda r: media_key[r["media_id"]]):
            lines.append("media " + _dumps({
                "media_id": r["media_id"],
                "kind": r["kind"],
                "captured_at": r["captured_at"],
                "payload_ref": r["payload_ref"],
                "original_filename": r["original_filename"],
            }))

        person_rows = conn.execute("SELECT * FROM persons").fetchall()
        person_key = {r["person_id"]: (r["created_at"], r["display_name"], r["person_id"])
                      for r in person_rows}
        for r in sorted(person_rows, key=lambda r: person_key[r["person_id"]]):
            lines.append("person " + _dumps({
                "person_id": r["person_id"],
                "display_name": r["display_name"],
                "created_at": r["created_at"],
            }))

        def embedding_key(row):
            if row["person_id"] is not None:
                return (0, person_key[row["person_id"]], row["enroll_seq"])
            src = media_key.get(row["source_media"], ("", "", "", ""))
            return (1, src, row["enroll_seq"])

        emb_rows = conn.execute("SELECT * FROM embeddings").fetchall()
        for r in sorted(emb_rows, key=embedding_key):
            lines.append("embedding " + _dumps({
                "embedding_id": r["embedding_id"],
                "person_id": r["person_id"],
                "source_media": r["source_media"],
                "vector": json.loads(r["vector"]),
            }))

        conv_rows = conn.execute("SELECT * FROM conversations").fetchall()

        def conv_key(row):
            owner = person_key.get(row["person_id"], ("~orphan",))
            return (row["started_at"], owner, row["conversation_id"])

        for r in sorted(conv_rows, key=conv_key):
            lines.append("conversation " + _dumps({
                "conversation_id": r["conversation_id"],
                "person_id": r["person_id"],
                "started_at": r["started_at"],
                "slices": json.loads(r["slices"]),
                "merged_text": r["merged_text"],
                "note": json.loads(r["note"]),
                "short_summary": r["short_summary"],
                "todos": json.loads(r["todos"]),
                "source_media": json.loads(r["source_media"]),
                "extraction_failed": bool(r["extraction_failed"]),
            }))

        for r in sorted(
            conn.execute("SELECT * FROM pending_identities").fetchall(),
            key=lambda r: (r["created_at"], media_key.get(r["image_media_id"], ())),
        ):
            lines.append("pending " + _dumps({
                "image_media_id": r["image_media_id"],
                "embedding_id": r["embedding_id"],
                "created_at": r["created_at"],
                "expires_at": r["expires_at"],
            }))

        for r in sorted(
            conn.execute("SELECT * FROM unmatched_captures").fetchall(),
            key=lambda r: (r["created_at"], media_key.get(r["image_media_id"], ())),
        ):
            lines.append("unmatched " + _dumps({
                "image_media_id": r["image_media_id"],
                "embedding_id": r["embedding_id"],
                "created_at": r["created_at"],
                "archived_at": r["archived_at"],
            }))

        d = conn.execute("SELECT * FROM display_state WHERE id = 1").fetchone()
        lines.append("display " + _dumps({
            "person_id": d["person_id"],
            "name": d["name"],
            "short_summary": d["short_summary"],
            "updated_at": d["updated_at"],
            "revision": d["revision"],
        }))
        return "\n".join(lines) + "\n"

    def import_canonical(self, text: str) -> None:
        """Load an exported stream into an empty store (payload bytes excluded)."""
        lines = text.splitlines()
        if not lines or lines[0] != _EXPORT_HEADER:
            raise InvariantViolation("unrecognized export header")
        with self.write() as conn:
            if conn.execute("SELECT COUNT(*) AS n FROM media").fetchone()["n"]:
                raise InvariantViolation("import requires an empty store")
            max_seq = 0
            for line in lines[1:]:
                if not line.strip():
                    continue
                entity, _, payload = line.partition(" ")
                rec = json.loads(payload)
                if entity == "media":
                    conn.execute(
                        "INSERT INTO media (media_id, kind, captured_at, payload_ref, original_filename)"
                        " VALUES (?, ?, ?, ?, ?)",
                        (rec["media_id"], rec["kind"], rec["captured_at"],
                         rec["payload_ref"], rec["original_filename"]),
                    )
                elif entity == "person":
                    conn.execute(
                        "INSERT INTO persons (person_id, display_name, created_at) VALUES (?, ?, ?)",
                        (rec["person_id"], rec["display_name"], rec["created_at"]),
                    )
                elif entity == "embedding":
                    max_seq += 1
                    conn.execute(
                        "INSERT INTO embeddings (embedding_id, person_id, source_media, vector, enroll_seq)"
                        " VALUES (?, ?, ?, ?, ?)",
                        (rec["embedding_id"], rec["person_id"], rec["source_media"],
                         _dumps(rec["vector"]), max_seq),
                    )
                elif entity == "conversation":
                    conn.execute(
                        "INSERT INTO conversations (conversation_id, person_id, started_at, slices,"
                        " merged_text, note, short_summary, todos, source_media, extraction_failed)"
                        " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                        (rec["conversation_id"], rec["person_id"], rec["started_at"],
                         _dumps(rec["slices"]), rec["merged_text"], _dumps(rec["note"]),
                         rec["short_summary"], _dumps(rec["todos"]), _dumps(rec["source_media"]),
                         1 if rec["extraction_failed"] else 0),
                    )
                elif entity == "pending":
                    conn.execute(
                        "INSERT INTO pending_identities (image_media_id, embedding_id, created_at, expires_at)"
                        " VALUES (?, ?, ?, ?)",
                        (rec["image_media_id"], rec["embedding_id"], rec["created_at"], rec["expires_at"]),
                    )
                elif entity == "unmatched":
                    conn.execute(
                        "INSERT INTO unmatched_captures (image_media_id, embedding_id, created_at, archived_at)"
                        " VALUES (?, ?, ?, ?)",
                        (rec["image_media_id"], rec["embedding_id"], rec["created_at"], rec["archived_at"]),
                    )
                elif entity == "display":
                    conn.execute(
                        "UPDATE display_state SET person_id = ?, name = ?, short_summary = ?,"
                        " updated_at = ?, revision = ? WHERE id = 1",
                        (rec["person_id"], rec["name"], rec["short_summary"],
                         rec["updated_at"], rec["revision"]),
                    )
                else:
                    raise InvariantViolation(f"unknown entity type {entity!r}")
            self._bump_generation(conn)


def normalize_export_ids(text: str) -> str:
    """Replace generated ids with positional names for cross-run diffs.

    Ids are renamed in first-appearance order (med-1, per-1, emb-1, con-1), so
    two exports of logically identical state normalize to identical text.
    """
    mapping: dict[str, str] = {}
    counters: dict[str, int] = {}
    for match in re.finditer(r"\b(med|per|emb|con)-[0-9a-f]{32}\b", text):
        token = match.group(0)
        if token not in mapping:
            prefix = match.group(1)
            counters[prefix] = counters.get(prefix, 0) + 1
            mapping[token] = f"{prefix}-{counters[prefix]}"
    for token, replacement in mapping.items():
        text = text.replace(token, replacement)
    return text
