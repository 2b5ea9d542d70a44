"""Core entity types, identifier discipline, and the filename contract.

Everything the glasses upload is keyed by a capture timestamp parsed from the
filename (`YYYYMMDD-HHMMSS.<ext>`, UTC). All timestamps in domain records are
stored at 1-second resolution so that filename round-tripping is exact and
corpus replays are byte-deterministic.
"""
from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import DimensionError, MalformedFilename, UnsupportedExtension

EMBEDDING_DIM = 128

KIND_IMAGE = "image"
KIND_AUDIO = "audio"

_EXT_KIND = {"jpg": KIND_IMAGE, "png": KIND_IMAGE, "wav": KIND_AUDIO}
_FILENAME_RE = re.compile(r"^(\d{8})-(\d{6})\.([A-Za-z0-9]+)$")


def new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex}"


def to_iso(ts: datetime) -> str:
    """Format a UTC timestamp at 1-second resolution."""
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def from_iso(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def utcnow() -> datetime:
    """Current UTC time truncated to whole seconds."""
    return datetime.now(timezone.utc).replace(microsecond=0)


def parse_media_filename(name: str) -> tuple[str, datetime]:
    """Parse `YYYYMMDD-HHMMSS.<ext>` into (kind, captured_at).

    jpg/png map to image, wav to audio. Raises MalformedFilename naming the
    offending field; UnsupportedExtension (a MalformedFilename) when only the
    extension is wrong, so upload handlers can answer 400 vs 415.
    """
    m = _FILENAME_RE.match(name)
    if not m:
        raise MalformedFilename(name, "timestamp")
    date_part, time_part, ext = m.groups()
    try:
        captured = datetime.strptime(f"{date_part}-{time_part}", "%Y%m%d-%H%M%S")
    except ValueError:
        raise MalformedFilename(name, "timestamp") from None
    kind = _EXT_KIND.get(ext.lower())
    if kind is None:
        raise UnsupportedExtension(name, ext)
    return kind, captured.replace(tzinfo=timezone.utc)


def format_media_filename(captured_at: datetime, kind: str, ext: str | None = None) -> str:
    """Inverse of parse_media_filename: format(parse(x)) == x for valid x."""
    if ext is None:
        ext = "jpg" if kind == KIND_IMAGE else "wav"
    if _EXT_KIND.get(ext.lower()) != kind:
        raise ValueError(f"extension {ext!r} does not carry kind {kind!r}")
    stamp = captured_at.astimezone(timezone.utc).strftime("%Y%m%d-%H%M%S")
    return f"{stamp}.{ext}"


def check_vector(vector) -> np.ndarray:
    """Validate and normalize an embedding vector to float64[128]."""
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != EMBEDDING_DIM:
        raise DimensionError(f"expected {EMBEDDING_DIM}-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("embedding vector contains non-finite components")
    return arr


@dataclass
class MediaObject:
    media_id: str
    kind: str
    captured_at: datetime
    payload_ref: str
    original_filename: str


@dataclass
class FaceEmbedding:
    embedding_id: str
    vector: np.ndarray
    source_media: str | None = None
    person_id: str | None = None
    enroll_seq: int = 0


@dataclass
class ConversationEntry:
    conversation_id: str
    started_at: datetime
    slices: list[tuple[str, str]]  # (absolute ISO timestamp, slice text)
    merged_text: str
    note: list[str]
    short_summary: str
    todos: list[str]
    source_media: list[str]
    person_id: str | None = None
    extraction_failed: bool = False

    def timestamped_text(self) -> str:
        """Render the transcript with per-slice timestamps, oldest first."""
        return "\n".join(f"[{ts}] {text}" for ts, text in self.slices)


@dataclass
class PersonRecord:
    person_id: str
    display_name: str
    created_at: datetime
    embeddings: list[str] = field(default_factory=list)
    conversations: list[ConversationEntry] = field(default_factory=list)


@dataclass
class DisplayState:
    person_id: str | None = None
    name: str | None = None
    short_summary: str | None = None
    updated_at: datetime | None = None
    revision: int = 0


@dataclass
class PendingIdentity:
    image_media_id: str
    embedding_id: str
    created_at: datetime
    expires_at: datetime


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching a probe vector against the known-faces database.

    matched=True carries the owning person and its distance (<= tau);
    matched=False carries the best distance seen, or None for an empty db.
    """

    matched: bool
    person_id: str | None
    distance: float | None

    @classmethod
    def hit(cls, person_id: str, distance: float) -> "MatchResult":
        return cls(True, person_id, float(distance))

    @classmethod
    def miss(cls, best_distance: float | None = None) -> "MatchResult":
        return cls(False, None, None if best_distance is None else float(best_distance))


@dataclass
class ExtractionResult:
    note: list[str]
    short_summary: str
    todos: list[str]
    name: str


JOB_QUEUED = "queued"
JOB_RUNNING = "running"
JOB_DONE = "done"
JOB_FAILED = "failed"
JOB_DEAD = "dead"

JOB_KIND_FACE = "encode_and_match"
JOB_KIND_AUDIO = "transcribe_extract"
JOB_KIND_SWEEP = "expire_sweep"

JOB_PRIORITIES = {JOB_KIND_FACE: 0, JOB_KIND_AUDIO: 10, JOB_KIND_SWEEP: 20}


@dataclass
class Job:
    job_id: str
    kind: str
    media_id: str | None
    priority: int
    status: str
    attempts: int
    enqueued_at: datetime
    error: str | None = None
