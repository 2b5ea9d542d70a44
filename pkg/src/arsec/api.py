"""HTTP surface: glasses-facing device endpoints and the retrieval web API.

Device protocol: POST /v1/media (multipart upload, DATE-TIME filename) and
GET /v1/display, designed for a dumb 2-second poller; a revision counter
doubles as ETag so unchanged polls cost a 304. Retrieval endpoints back the
memory browser: contacts, full records, edits (audited), and orphan triage.

JSON response shapes are pinned by the schema files in docs/wire/.
"""
from __future__ import annotations

import json
import logging
import os

from fastapi import Depends, FastAPI, HTTPException, Request, Response, UploadFile
from pydantic import BaseModel

from .errors import MalformedFilename, UnsupportedExtension
from .extraction import is_single_sentence
from .model import to_iso
from .service import Service

logger = logging.getLogger(__name__)


class MediaAccepted(BaseModel):
    media_id: str
    job_id: str


class DisplayResponse(BaseModel):
    name: str | None
    short_summary: str | None
    revision: int
    updated_at: str | None


class JobView(BaseModel):
    job_id: str
    kind: str
    media_id: str | None
    priority: int
    status: str
    attempts: int
    enqueued_at: str
    error: str | None


class ContactSummary(BaseModel):
    person_id: str
    display_name: str
    n_conversations: int
    last_seen: str
    thumbnail: str | None


class ConversationEdit(BaseModel):
    conversation_id: str
    note: list[str] | None = None
    short_summary: str | None = None
    todos: list[str] | None = None


class ContactPatch(BaseModel):
    display_name: str | None = None
    conversations: list[ConversationEdit] | None = None


class AttachBody(BaseModel):
    person_id: str


def build_app(service: Service) -> FastAPI:
    app = FastAPI(title="arsec", version="0.1.0")
    store = service.store
    config = service.config

    def require_device_auth(request: Request) -> None:
        token = os.environ.get(config.device_token_env, "")
        if not token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="invalid device token")

    # -- device endpoints ----------------------------------------------------

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/media", status_code=202, response_model=MediaAccepted,
              dependencies=[Depends(require_device_auth)])
    async def upload_media(file: UploadFile):
        payload = await file.read()
        if len(payload) > config.max_upload_bytes:
            raise HTTPException(status_code=413, detail="payload too large")
        try:
            media, job_id = service.ingest(file.filename or "", payload)
        except UnsupportedExtension as exc:
            raise HTTPException(status_code=415, detail=str(exc)) from exc
        except MalformedFilename as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return MediaAccepted(media_id=media.media_id, job_id=job_id)

    @app.get("/v1/display", response_model=DisplayResponse,
             dependencies=[Depends(require_device_auth)])
    def get_display(request: Request, response: Response):
        snapshot = store.display()
        etag = str(snapshot.revision)
        if request.headers.get("if-none-match") == etag:
            return Response(status_code=304, headers={"etag": etag})
        response.headers["etag"] = etag
        return DisplayResponse(
            name=snapshot.name,
            short_summary=snapshot.short_summary,
            revision=snapshot.revision,
            updated_at=to_iso(snapshot.updated_at) if snapshot.updated_at else None,
        )

    def job_view(job) -> JobView:
        return JobView(
            job_id=job.job_id,
            kind=job.kind,
            media_id=job.media_id,
            priority=job.priority,
            status=job.status,
            attempts=job.attempts,
            enqueued_at=to_iso(job.enqueued_at),
            error=job.error,
        )

    @app.get("/v1/jobs/{job_id}", response_model=JobView,
             dependencies=[Depends(require_device_auth)])
    def get_job(job_id: str):
        job = service.queue.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return job_view(job)

    @app.get("/v1/jobs", response_model=list[JobView],
             dependencies=[Depends(require_device_auth)])
    def list_jobs(status: str | None = None):
        return [job_view(j) for j in service.queue.list_jobs(status)]

    # -- retrieval endpoints ------------------------------------------------------

    def contact_summary(person_id: str) -> ContactSummary:
        person = store.get_person(person_id)
        last_seen = (max(c.started_at for c in person.conversations)
                     if person.conversations else person.created_at)
        return ContactSummary(
            person_id=person.person_id,
            display_name=person.display_name,
            n_conversations=len(person.conversations),
            last_seen=to_iso(last_seen),
            thumbnail=store.thumbnail_media(person_id),
        )

    def contact_matches(person, needle: str) -> bool:
        needle = needle.lower()
        if needle in person.display_name.lower():
            return True
        for conv in person.conversations:
            haystacks = [conv.merged_text, conv.short_summary, *conv.note, *conv.todos]
            if any(needle in h.lower() for h in haystacks):
                return True
        return False

    @app.get("/v1/contacts", response_model=list[ContactSummary])
    def list_contacts(limit: int = 100, offset: int = 0, q: str | None = None):
        summaries = []
        for person_id in store.list_person_ids():
            if q and not contact_matches(store.get_person(person_id), q):
                continue
            summaries.append(contact_summary(person_id))
        summaries.sort(key=lambda s: (s.last_seen, s.person_id), reverse=True)
        return summaries[offset:offset + limit]

    def conversation_view(conv) -> dict:
        return {
            "conversation_id": conv.conversation_id,
            "started_at": to_iso(conv.started_at),
            "short_summary": conv.short_summary,
            "note": conv.note,
            "todos": conv.todos,
            "transcript": {
                "slices": [[ts, text] for ts, text in conv.slices],
                "merged_text": conv.merged_text,
                "timestamped_text": conv.timestamped_text(),
            },
            "source_media": conv.source_media,
            "extraction_failed": conv.extraction_failed,
        }

    @app.get("/v1/contacts/{person_id}")
    def get_contact(person_id: str):
        person = store.get_person(person_id)
        if person is None:
            raise HTTPException(status_code=404, detail="unknown contact")
        return {
            "person_id": person.person_id,
            "display_name": person.display_name,
            "created_at": to_iso(person.created_at),
            "embeddings": [
                {"embedding_id": e, "source_media": getattr(store.get_embedding(e), "source_media", None)}
                for e in person.embeddings
            ],
            "conversations": [conversation_view(c) for c in person.conversations],
            "thumbnail": store.thumbnail_media(person_id),
        }

    @app.patch("/v1/contacts/{person_id}")
    def patch_contact(person_id: str, patch: ContactPatch, request: Request):
        person = store.get_person(person_id)
        if person is None:
            raise HTTPException(status_code=404, detail="unknown contact")
        if patch.display_name is not None and not patch.display_name.strip():
            raise HTTPException(status_code=422, detail="display_name must be non-empty")
        owned = {c.conversation_id for c in person.conversations}
        for edit in patch.conversations or []:
            if edit.conversation_id not in owned:
                raise HTTPException(
                    status_code=422,
                    detail=f"conversation {edit.conversation_id} does not belong to this contact")
            if edit.short_summary is not None and not is_single_sentence(edit.short_summary):
                raise HTTPException(status_code=422, detail="short_summary must be a single sentence")

        with store.write():
            if patch.display_name is not None:
                store.set_display_name(person_id, patch.display_name.strip())
            for edit in patch.conversations or []:
                store.update_conversation(
                    edit.conversation_id,
                    note=edit.note,
                    short_summary=edit.short_summary,
                    todos=edit.todos,
                )
            actor = request.client.host if request.client else "local"
            store.append_audit(actor, "patch_contact",
                               json.dumps({"person_id": person_id,
                                           **patch.model_dump(exclude_none=True)}))
        return get_contact(person_id)

    @app.get("/v1/orphans")
    def list_orphans():
        return [conversation_view(c) for c in store.orphan_conversations()]

    @app.post("/v1/orphans/{conversation_id}/attach")
    def attach_orphan(conversation_id: str, body: AttachBody):
        conv = store.get_conversation(conversation_id)
        if conv is None or conv.person_id is not None:
            raise HTTPException(status_code=404, detail="unknown orphan")
        if not store.person_exists(body.person_id):
            raise HTTPException(status_code=404, detail="unknown contact")
        store.attach_orphan(conversation_id, body.person_id)
        return get_contact(body.person_id)

    if config.ui_dir and os.path.isdir(config.ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="console")

    return app
