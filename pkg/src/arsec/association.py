"""Association engine: routes processed captures into identity state changes.

Images either recognize a known person (display update + re-enrollment +
active conversation target) or park a pending identity awaiting the next
audio. Audio consumes the oldest live pending (new person named from the
extraction), else appends to the active target, else is kept as an orphan for
manual triage; dropping it silently would be unacceptable in a memory aid.

All decisions are keyed on capture timestamps, not wall clock, so replaying a
corpus is deterministic. Handlers are idempotent per media_id.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, timedelta

from .audio import Transcript
from .backends import pick_primary_face
from .errors import InvariantViolation
from .model import (
    ConversationEntry,
    ExtractionResult,
    MediaObject,
    PendingIdentity,
    new_id,
)

logger = logging.getLogger(__name__)

IMG_RECOGNIZED = "recognized"
IMG_PENDING_CREATED = "pending_created"
IMG_NO_FACE = "no_face"
AUD_PERSON_CREATED = "person_created"
AUD_APPENDED = "appended"
AUD_ORPHANED = "orphaned"


@dataclass(frozen=True)
class Outcome:
    kind: str
    person_id: str | None = None

    def encode(self) -> str:
        return f"{self.kind}:{self.person_id}" if self.person_id else self.kind

    @classmethod
    def decode(cls, text: str) -> "Outcome":
        kind, _, person = text.partition(":")
        return cls(kind, person or None)


class AssociationEngine:
    def __init__(self, store, matcher, encoder, window_s: float = 120.0):
        self.store = store
        self.matcher = matcher
        self.encoder = encoder
        self.window = timedelta(seconds=window_s)
        self.events: list[dict] = []

    def _log_event(self, event: str, media_id: str | None, outcome: str) -> None:
        self.events.append({"event": event, "media_id": media_id, "outcome": outcome})
        logger.info("event=%s media=%s outcome=%s", event, media_id, outcome)

    # -- images ---------------------------------------------------------------

    def handle_image(self, media: MediaObject) -> Outcome:
        if media.kind != "image":
            raise InvariantViolation(f"handle_image got kind {media.kind!r}")
        recorded = self.store.handled_outcome(media.media_id)
        if recorded is not None:
            return Outcome.decode(recorded)

        payload = self.store.read_payload(media)
        faces = self.encoder.encode(payload)
        if not faces:
            outcome = Outcome(IMG_NO_FACE)
            with self.store.write():
                self.store.mark_handled(media.media_id, outcome.encode())
            self._log_event("image", media.media_id, outcome.encode())
            return outcome

        vector = pick_primary_face(faces).vector
        result = self.matcher.identify(vector)
        with self.store.write():
            if result.matched:
                person = self.store.get_person(result.person_id)
                self.store.update_display(
                    person.person_id,
                    person.display_name,
                    self.store.latest_summary_for_person(person.person_id),
                    at=media.captured_at,
                )
                self.matcher.enroll(vector, person.person_id, media.media_id)
                self.store.set_active_target(person.person_id, media.captured_at)
                outcome = Outcome(IMG_RECOGNIZED, person.person_id)
            else:
                emb = self.store.add_embedding(vector, source_media=media.media_id)
                self.store.add_pending(PendingIdentity(
                    image_media_id=media.media_id,
                    embedding_id=emb.embedding_id,
                    created_at=media.captured_at,
                    expires_at=media.captured_at + self.window,
                ))
                outcome = Outcome(IMG_PENDING_CREATED)
            self.store.mark_handled(media.media_id, outcome.encode())
        self._log_event("image", media.media_id, outcome.encode())
        return outcome

    # -- audio ----------------------------------------------------------------

    def handle_audio(self, media: MediaObject, transcript: Transcript,
                     extraction: ExtractionResult | None) -> Outcome:
        if media.kind != "audio":
            raise InvariantViolation(f"handle_audio got kind {media.kind!r}")
        recorded = self.store.handled_outcome(media.media_id)
        if recorded is not None:
            return Outcome.decode(recorded)

        at = media.captured_at
        entry = ConversationEntry(
            conversation_id=new_id("con"),
            started_at=at,
            slices=transcript.absolute_slices(at),
            merged_text=transcript.merged_text,
            note=extraction.note if extraction else [],
            short_summary=extraction.short_summary if extraction else "",
            todos=extraction.todos if extraction else [],
            source_media=[media.media_id],
            extraction_failed=extraction is None,
        )

        with self.store.write():
            pending = self.store.oldest_consumable_pending(at)
            if pending is not None:
                name = extraction.name if extraction else self._placeholder_name(at)
                person = self.store.create_person(name, created_at=at)
                self.store.assign_embedding(pending.embedding_id, person.person_id)
                entry.person_id = person.person_id
                entry.source_media = [pending.image_media_id, media.media_id]
                self.store.add_conversation(entry)
                self.store.consume_pending(pending.image_media_id)
                outcome = Outcome(AUD_PERSON_CREATED, person.person_id)
            else:
                target = self.store.active_target()
                if target is not None and self._target_live(target, at):
                    person_id, _ = target
                    entry.person_id = person_id
                    self.store.add_conversation(entry)
                    display = self.store.display()
                    if display.person_id == person_id:
                        person = self.store.get_person(person_id)
                        self.store.update_display(
                            person_id, person.display_name, entry.short_summary, at=at,
                        )
                    outcome = Outcome(AUD_APPENDED, person_id)
                else:
                    self.store.add_conversation(entry)
                    outcome = Outcome(AUD_ORPHANED)
            self.store.mark_handled(media.media_id, outcome.encode())
        self._log_event("audio", media.media_id, outcome.encode())
        return outcome

    def _target_live(self, target: tuple[str, datetime], at: datetime) -> bool:
        _, set_at = target
        return set_at <= at <= set_at + self.window

    @staticmethod
    def _placeholder_name(at: datetime) -> str:
        return f"Unknown-{at.strftime('%Y%m%d-%H%M%S')}"

    # -- maintenance ------------------------------------------------------------

    def expire_pending(self, now: datetime) -> int:
        """Archive pendings whose window elapsed (expires_at < now, inclusive bound)."""
        count = self.store.expire_pendings(now)
        if count:
            self._log_event("sweep", None, f"expired:{count}")
        return count
