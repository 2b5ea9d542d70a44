import io
import wave
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pytest

from arsec.backends import ScriptedExtractionBackend, SyntheticEncoderBackend
from arsec.config import Config
from arsec.store import Store

REPO_ROOT = Path(__file__).resolve().parent.parent
CORPUS_DIR = REPO_ROOT / "src" / "arsec" / "corpus"
WIRE_DIR = REPO_ROOT / "docs" / "wire"
DATA_DIR = Path(__file__).resolve().parent / "data"


def ts(text: str) -> datetime:
    """Shorthand UTC timestamp: ts('2024-06-01 09:00:00')."""
    return datetime.strptime(text, "%Y-%m-%d %H:%M:%S").replace(tzinfo=timezone.utc)


def make_wav(duration_s: float, framerate: int = 1000) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(framerate)
        wav.writeframes(b"\x00\x00" * int(duration_s * framerate))
    return buf.getvalue()


def face_bytes(label: str, shot: int = 0) -> bytes:
    """Distinct, stable payload for one capture of one identity."""
    return f"arsec synthetic face capture\nlabel={label}\nshot={shot}\n".encode()


@pytest.fixture
def store(tmp_path):
    s = Store(tmp_path / "data")
    yield s
    s.close()


@pytest.fixture
def encoder():
    return SyntheticEncoderBackend()


class EchoExtractionBackend(ScriptedExtractionBackend):
    """Reference-extractor fallback only; counts calls."""


@pytest.fixture
def base_config(tmp_path):
    return Config(data_dir=str(tmp_path / "data"))


@pytest.fixture
def svc(tmp_path):
    """Service with mock backends; jobs run via drain() for determinism."""
    from arsec.service import Service

    config = Config(data_dir=str(tmp_path / "data"), sweep_interval_s=0)
    service = Service(config)
    yield service
    service.stop()


@pytest.fixture
def client(svc):
    from fastapi.testclient import TestClient

    from arsec.api import build_app

    return TestClient(build_app(svc))


def drain(service, max_steps=1000):
    """Run queued jobs inline (claims like a worker, including retries)."""
    for _ in range(max_steps):
        job = service.queue.claim_next()
        if job is None:
            return
        handler = service.pool.handlers[job.kind]
        try:
            handler(job)
        except Exception as exc:
            service.queue.fail(job.job_id, f"{type(exc).__name__}: {exc}")
        else:
            service.queue.complete(job.job_id)
    raise AssertionError("queue did not settle")


def upload(client, name: str, payload: bytes, mime="application/octet-stream"):
    return client.post("/v1/media", files={"file": (name, payload, mime)})


def speech_text(n: int) -> str:
    return (DATA_DIR / f"speech{n}.txt").read_text()


def random_embedding(rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 1.0, 128)
