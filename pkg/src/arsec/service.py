"""Pipeline assembly: store + backends + matcher + engine + job workers.

One Service owns everything a running server needs. Job handlers live here so
the queue itself stays generic; they are idempotent via the association
engine's media_id markers.
"""
from __future__ import annotations

import hashlib
import logging
import threading
from datetime import datetime, timezone

from . import audio as audio_mod
from .association import AssociationEngine
from .backends import (
    HttpExtractionBackend,
    HttpTranscriptionBackend,
    MockTranscriptionBackend,
    ScriptedExtractionBackend,
    SyntheticEncoderBackend,
)
from .config import Config
from .errors import ExtractionFailed
from .extraction import extract
from .facematch import FaceMatcher
from .jobs import JobQueue, WorkerPool
from .model import (
    JOB_KIND_AUDIO,
    JOB_KIND_FACE,
    JOB_KIND_SWEEP,
    KIND_IMAGE,
    Job,
    MediaObject,
    parse_media_filename,
)
from .store import Store

logger = logging.getLogger(__name__)


def build_backends(config: Config) -> tuple:
    enc_cfg = config.backend("encoder")
    if enc_cfg.mode == "mock":
        encoder = SyntheticEncoderBackend()
        if config.fixtures_dir:
            n = encoder.register_dir(config.fixtures_dir)
            logger.info("synthetic encoder registered %d fixture faces", n)
    else:
        from .backends import DetectedFace  # adapter shares the wire shape
        import httpx
        import numpy as np

        class HttpEncoderBackend:
            def __init__(self, endpoint: str, timeout: float):
                self.endpoint = endpoint
                self._client = httpx.Client(timeout=timeout)

            def encode(self, image: bytes):
                resp = self._client.post(self.endpoint, content=image)
                resp.raise_for_status()
                return [
                    DetectedFace(
                        vector=np.asarray(f["vector"], dtype=np.float64),
                        bbox=tuple(f["bbox"]) if f.get("bbox") else None,
                    )
                    for f in resp.json().get("faces", [])
                ]

        encoder = HttpEncoderBackend(enc_cfg.endpoint, config.backend_timeout_s)

    tr_cfg = config.backend("transcription")
    if tr_cfg.mode == "mock":
        transcription = MockTranscriptionBackend(config.fixtures_dir or ".")
    else:
        transcription = HttpTranscriptionBackend(tr_cfg.endpoint, config.backend_timeout_s)

    ex_cfg = config.backend("extraction")
    if ex_cfg.mode == "mock":
        if config.fixtures_dir:
            extraction = ScriptedExtractionBackend.from_corpus(
                config.fixtures_dir, config.slice_window_s, config.slice_overlap_s)
        else:
            extraction = ScriptedExtractionBackend()
    else:
        extraction = HttpExtractionBackend(
            ex_cfg.endpoint, ex_cfg.api_key_env, timeout=config.backend_timeout_s)

    return encoder, transcription, extraction


class Service:
    def __init__(self, config: Config, encoder=None, transcription=None, extraction=None):
        self.config = config
        self.store = Store(config.data_dir)
        built = build_backends(config)
        self.encoder = encoder or built[0]
        self.transcription = transcription or built[1]
        self.extraction = extraction or built[2]
        self.matcher = FaceMatcher(self.store, tau=config.tau, enroll_cap=config.enroll_cap)
        self.engine = AssociationEngine(
            self.store, self.matcher, self.encoder, window_s=config.association_window_s)
        self.queue = JobQueue(self.store, max_attempts=config.max_attempts)
        self.pool = WorkerPool(self.queue, self.handlers(), workers=config.workers)
        self._sweep_timer: threading.Timer | None = None
        self._stopped = False

    def handlers(self) -> dict:
        return {
            JOB_KIND_FACE: self._handle_face_job,
            JOB_KIND_AUDIO: self._handle_audio_job,
            JOB_KIND_SWEEP: self._handle_sweep_job,
        }

    # -- job handlers ---------------------------------------------------------

    def _handle_face_job(self, job: Job) -> None:
        media = self.store.get_media(job.media_id)
        self.engine.handle_image(media)

    def _handle_audio_job(self, job: Job) -> None:
        media = self.store.get_media(job.media_id)
        payload = self.store.read_payload(media)
        slices = audio_mod.segment(
            payload, self.config.slice_window_s, self.config.slice_overlap_s)
        transcript = audio_mod.transcribe_all(
            slices, self.transcription,
            source_name=media.original_filename,
            parallelism=self.config.transcribe_parallelism)
        self.store.upsert_transcript(
            media.media_id, transcript.absolute_slices(media.captured_at),
            transcript.merged_text)
        extraction = None
        if transcript.merged_text.strip():
            try:
                extraction = extract(transcript.merged_text, self.extraction,
                                     retries=self.config.extract_retries)
            except ExtractionFailed as exc:
                logger.warning("extraction failed for %s; storing transcript only: %s",
                               media.media_id, exc)
        self.engine.handle_audio(media, transcript, extraction)

    def _handle_sweep_job(self, job: Job) -> None:
        self.engine.expire_pending(datetime.now(timezone.utc))

    # -- ingestion -------------------------------------------------------------

    def ingest(self, filename: str, payload: bytes) -> tuple[MediaObject, str]:
        """Persist an upload and enqueue its pipeline job.

        Re-submitting the identical file is deduped at the job level (same
        job_id while one is live) but always stores a fresh MediaObject:
        filenames are metadata, not keys.
        """
        kind, captured_at = parse_media_filename(filename)
        media = self.store.add_media(kind, captured_at, filename, payload)
        digest = hashlib.sha256(filename.encode("utf-8") + payload).hexdigest()
        job_kind = JOB_KIND_FACE if kind == KIND_IMAGE else JOB_KIND_AUDIO
        job_id = self.queue.enqueue(job_kind, media.media_id, dedupe_key=digest)
        return media, job_id

    # -- lifecycle ----------------------------------------------------------------

    def start(self, sweep: bool = True) -> None:
        self.pool.start()
        if sweep and self.config.sweep_interval_s > 0:
            self._schedule_sweep()

    def _schedule_sweep(self) -> None:
        if self._stopped:
            return
        self.queue.enqueue(JOB_KIND_SWEEP, dedupe_key="sweep")
        self._sweep_timer = threading.Timer(self.config.sweep_interval_s, self._schedule_sweep)
        self._sweep_timer.daemon = True
        self._sweep_timer.start()

    def stop(self) -> None:
        self._stopped = True
        if self._sweep_timer is not None:
            self._sweep_timer.cancel()
        self.pool.shutdown()
        self.store.close()
