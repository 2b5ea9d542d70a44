"""Persistent in-process priority work queue.

Face jobs (priority 0) preempt audio jobs (10) and sweeps (20): workers always
pull the queued job with the lowest (priority, enqueue order). Jobs survive
restarts in the store; a job found `running` after a crash is treated as a
failed attempt and re-queued until max_attempts, then marked dead. Handlers
are expected to be idempotent (the association engine keys off media_id).
"""
from __future__ import annotations

import logging
import threading
import time
from typing import Callable

from .errors import UnknownMedia
from .model import (
    JOB_DEAD,
    JOB_DONE,
    JOB_PRIORITIES,
    JOB_QUEUED,
    JOB_RUNNING,
    Job,
    from_iso,
    new_id,
    to_iso,
    utcnow,
)

logger = logging.getLogger(__name__)


class JobQueue:
    def __init__(self, store, max_attempts: int = 3):
        self.store = store
        self.max_attempts = max_attempts
        self._wakeup = threading.Condition()

    # -- submission -------------------------------------------------------------

    def enqueue(self, kind: str, media_id: str | None = None,
                dedupe_key: str | None = None) -> str:
        """Persist a job; duplicate (kind, key) with a live job returns its id."""
        if kind not in JOB_PRIORITIES:
            raise ValueError(f"unknown job kind {kind!r}")
        key = dedupe_key or media_id
        with self.store.write() as conn:
            if media_id is not None and not self.store.media_exists(media_id):
                raise UnknownMedia(media_id)
            if key is not None:
                row = conn.execute(
                    "SELECT job_id FROM jobs WHERE kind = ? AND dedupe_key = ?"
                    " AND status IN ('queued', 'running') ORDER BY seq LIMIT 1",
                    (kind, key),
                ).fetchone()
                if row is not None:
                    return row["job_id"]
            job_id = new_id("job")
            conn.execute(
                "INSERT INTO jobs (job_id, kind, media_id, dedupe_key, priority, status,"
                " attempts, enqueued_at) VALUES (?, ?, ?, ?, ?, 'queued', 0, ?)",
                (job_id, kind, media_id, key, JOB_PRIORITIES[kind], to_iso(utcnow())),
            )
        with self._wakeup:
            self._wakeup.notify_all()
        return job_id

    # -- inspection ----------------------------------------------------------------

    @staticmethod
    def _job_from_row(row) -> Job:
        return Job(
            job_id=row["job_id"],
            kind=row["kind"],
            media_id=row["media_id"],
            priority=row["priority"],
            status=row["status"],
            attempts=row["attempts"],
            enqueued_at=from_iso(row["enqueued_at"]),
            error=row["error"],
        )

    def get(self, job_id: str) -> Job | None:
        row = self.store._conn().execute(
            "SELECT * FROM jobs WHERE job_id = ?", (job_id,)
        ).fetchone()
        return self._job_from_row(row) if row else None

    def list_jobs(self, status: str | None = None) -> list[Job]:
        conn = self.store._conn()
        if status:
            rows = conn.execute("SELECT * FROM jobs WHERE status = ? ORDER BY seq", (status,))
        else:
            rows = conn.execute("SELECT * FROM jobs ORDER BY seq")
        return [self._job_from_row(r) for r in rows]

    def live_count(self) -> int:
        row = self.store._conn().execute(
            "SELECT COUNT(*) AS n FROM jobs WHERE status IN ('queued', 'running')"
        ).fetchone()
        return row["n"]

    def audit_terminal(self) -> list[str]:
        """After a drain every job must be done or dead; report the rest."""
        return [
            f"job {j.job_id} ({j.kind}) stuck in {j.status}"
            for j in self.list_jobs()
            if j.status not in (JOB_DONE, JOB_DEAD)
        ]

    # -- worker side -----------------------------------------------------------------

    def claim_next(self) -> Job | None:
        """Atomically take the queued job with the lowest (priority, seq)."""
        with self.store.write() as conn:
            row = conn.execute(
                "SELECT * FROM jobs WHERE status = 'queued' ORDER BY priority, seq LIMIT 1"
            ).fetchone()
            if row is None:
                return None
            conn.execute(
                "UPDATE jobs SET status = 'running' WHERE job_id = ?", (row["job_id"],)
            )
        job = self._job_from_row(row)
        job.status = JOB_RUNNING
        return job

    def complete(self, job_id: str) -> None:
        with self.store.write() as conn:
            conn.execute(
                "UPDATE jobs SET status = 'done', attempts = attempts + 1 WHERE job_id = ?",
                (job_id,),
            )

    def fail(self, job_id: str, error: str) -> str:
        """Count a failed attempt; re-queue or mark dead. Returns the new status."""
        with self.store.write() as conn:
            row = conn.execute(
                "SELECT attempts FROM jobs WHERE job_id = ?", (job_id,)
            ).fetchone()
            attempts = row["attempts"] + 1
            status = JOB_DEAD if attempts >= self.max_attempts else JOB_QUEUED
            conn.execute(
                "UPDATE jobs SET status = ?, attempts = ?, error = ? WHERE job_id = ?",
                (status, attempts, error[:500], job_id),
            )
        if status == JOB_QUEUED:
            with self._wakeup:
                self._wakeup.notify_all()
        return status

    def recover(self) -> int:
        """Re-queue jobs left running by a crash (counts as a failed attempt)."""
        recovered = 0
        for job in self.list_jobs(JOB_RUNNING):
            self.fail(job.job_id, "interrupted by restart")
            recovered += 1
        return recovered

    def wait_idle(self, timeout: float = 30.0, poll: float = 0.02) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.live_count() == 0:
                return True
            time.sleep(poll)
        return self.live_count() == 0


class WorkerPool:
    """Threads pulling strictly by priority; graceful shutdown drains running jobs."""

    def __init__(self, queue: JobQueue, handlers: dict[str, Callable[[Job], None]],
                 workers: int = 2):
        self.queue = queue
        self.handlers = handlers
        self.n = max(1, workers)
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self.on_start: Callable[[Job], None] | None = None  # test hook

    def start(self) -> None:
        self.queue.recover()
        for i in range(self.n):
            t = threading.Thread(target=self._run, name=f"arsec-worker-{i}", daemon=True)
            t.start()
            self._threads.append(t)

    def _run(self) -> None:
        while not self._stop.is_set():
            job = self.queue.claim_next()
            if job is None:
                with self.queue._wakeup:
                    self.queue._wakeup.wait(timeout=0.05)
                continue
            if self.on_start:
                self.on_start(job)
            handler = self.handlers.get(job.kind)
            try:
                if handler is None:
                    raise ValueError(f"no handler for job kind {job.kind!r}")
                handler(job)
            except Exception as exc:
                status = self.queue.fail(job.job_id, f"{type(exc).__name__}: {exc}")
                logger.warning("job %s (%s) failed -> %s: %s",
                               job.job_id, job.kind, status, exc)
            else:
                self.queue.complete(job.job_id)

    def shutdown(self) -> None:
        """Stop dispatching; running jobs complete before workers exit."""
        self._stop.set()
        with self.queue._wakeup:
            self.queue._wakeup.notify_all()
        for t in self._threads:
            t.join(timeout=60)
        self._threads.clear()
