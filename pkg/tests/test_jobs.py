import random
import threading
import time

import pytest

from arsec.errors import UnknownMedia
from arsec.jobs import JobQueue, WorkerPool
from arsec.model import JOB_KIND_AUDIO, JOB_KIND_FACE, JOB_KIND_SWEEP

from conftest import ts


@pytest.fixture
def queue(store):
    return JobQueue(store, max_attempts=3)


def add_media(store, n=0, kind="audio"):
    ext = "wav" if kind == "audio" else "jpg"
    return store.add_media(kind, ts("2024-06-01 09:00:00"),
                           f"20240601-0900{n:02d}.{ext}", b"payload%d" % n)


def test_enqueue_requires_known_media(queue):
    with pytest.raises(UnknownMedia):
        queue.enqueue(JOB_KIND_FACE, "med-missing")


def test_duplicate_live_job_returns_same_id(store, queue):
    media = add_media(store)
    first = queue.enqueue(JOB_KIND_AUDIO, media.media_id)
    second = queue.enqueue(JOB_KIND_AUDIO, media.media_id)
    assert first == second
    assert len(queue.list_jobs()) == 1


def test_new_job_after_completion(store, queue):
    media = add_media(store)
    first = queue.enqueue(JOB_KIND_AUDIO, media.media_id)
    queue.claim_next()
    queue.complete(first)
    second = queue.enqueue(JOB_KIND_AUDIO, media.media_id)
    assert second != first


def test_priority_face_preempts_queued_audio(store, queue):
    audio_jobs = [queue.enqueue(JOB_KIND_AUDIO, add_media(store, i).media_id)
                  for i in range(10)]
    face = queue.enqueue(JOB_KIND_FACE, add_media(store, 20, "image").media_id)
    assert queue.claim_next().job_id == face
    assert queue.claim_next().job_id == audio_jobs[0]


def test_scripted_schedules_match_priority_oracle(store, queue):
    """100 random schedules: dequeue order equals sort by (priority, enqueue order)."""
    rng = random.Random(99)
    media = {k: add_media(store, 50, "image") for k in ["img"]}["img"]
    audio_media = add_media(store, 51)
    for schedule in range(100):
        expected = []
        for i in range(rng.randint(1, 8)):
            kind = rng.choice([JOB_KIND_FACE, JOB_KIND_AUDIO, JOB_KIND_SWEEP])
            mid = {JOB_KIND_FACE: media.media_id, JOB_KIND_AUDIO: audio_media.media_id,
                   JOB_KIND_SWEEP: None}[kind]
            job_id = queue.enqueue(kind, mid, dedupe_key=f"s{schedule}-{i}")
            expected.append((kind, job_id))
        expected.sort(key=lambda e: {JOB_KIND_FACE: 0, JOB_KIND_AUDIO: 10,
                                     JOB_KIND_SWEEP: 20}[e[0]])
        got = []
        while True:
            job = queue.claim_next()
            if job is None:
                break
            got.append(job.job_id)
            queue.complete(job.job_id)
        assert got == [job_id for _, job_id in expected], f"schedule {schedule}"


def test_handler_raising_three_times_goes_dead(store, queue):
    media = add_media(store)
    job_id = queue.enqueue(JOB_KIND_AUDIO, media.media_id)

    pool = WorkerPool(queue, {JOB_KIND_AUDIO: lambda job: 1 / 0}, workers=1)
    pool.start()
    deadline = time.monotonic() + 5
    while time.monotonic() < deadline and queue.get(job_id).status != "dead":
        time.sleep(0.01)
    pool.shutdown()

    job = queue.get(job_id)
    assert job.status == "dead"
    assert job.attempts == 3
    assert "division" in job.error


def test_retry_then_success(store, queue):
    media = add_media(store)
    job_id = queue.enqueue(JOB_KIND_AUDIO, media.media_id)
    fails = {"left": 2}

    def flaky(job):
        if fails["left"] > 0:
            fails["left"] -= 1
            raise RuntimeError("flaky")

    pool = WorkerPool(queue, {JOB_KIND_AUDIO: flaky}, workers=1)
    pool.start()
    assert queue.wait_idle(timeout=5)
    pool.shutdown()
    job = queue.get(job_id)
    assert job.status == "done"
    assert job.attempts == 3  # two failures + one success


def test_shutdown_lets_running_job_finish(store, queue):
    media = add_media(store)
    started = threading.Event()
    release = threading.Event()
    finished = []

    def slow(job):
        started.set()
        release.wait(timeout=5)
        finished.append(job.job_id)

    job_id = queue.enqueue(JOB_KIND_AUDIO, media.media_id)
    pool = WorkerPool(queue, {JOB_KIND_AUDIO: slow}, workers=1)
    pool.start()
    assert started.wait(timeout=5)

    stopper = threading.Thread(target=pool.shutdown)
    stopper.start()
    time.sleep(0.05)
    later = queue.enqueue(JOB_KIND_AUDIO, add_media(store, 2).media_id,
                          dedupe_key="later")
    release.set()
    stopper.join(timeout=5)

    assert finished == [job_id]
    assert queue.get(job_id).status == "done"
    assert queue.get(later).status == "queued"  # no new dequeues after shutdown


def test_recover_requeues_interrupted_jobs(store, queue):
    media = add_media(store)
    job_id = queue.enqueue(JOB_KIND_AUDIO, media.media_id)
    queue.claim_next()
    assert queue.get(job_id).status == "running"

    recovered = queue.recover()  # what a restart does
    assert recovered == 1
    job = queue.get(job_id)
    assert job.status == "queued"
    assert job.attempts == 1


def test_no_lost_jobs_after_drain(store, queue):
    for i in range(5):
        queue.enqueue(JOB_KIND_AUDIO, add_media(store, i).media_id)
    pool = WorkerPool(queue, {JOB_KIND_AUDIO: lambda job: None}, workers=2)
    pool.start()
    assert queue.wait_idle(timeout=5)
    pool.shutdown()
    assert queue.audit_terminal() == []


def test_bounded_attempts_invariant(store, queue):
    for i in range(4):
        queue.enqueue(JOB_KIND_AUDIO, add_media(store, i).media_id)
    pool = WorkerPool(queue, {JOB_KIND_AUDIO: lambda job: 1 / 0}, workers=2)
    pool.start()
    deadline = time.monotonic() + 5
    while time.monotonic() < deadline and any(
            j.status != "dead" for j in queue.list_jobs()):
        time.sleep(0.01)
    pool.shutdown()
    assert all(j.attempts <= 3 for j in queue.list_jobs())
    assert all(j.status == "dead" for j in queue.list_jobs())
