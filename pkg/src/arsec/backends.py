"""Pluggable backends: face encoding, transcription, extraction.

Real models run behind HTTP adapters; the mock implementations are
deterministic and file-driven so the whole pipeline runs hermetically:

- synthetic encoder: an image's identity label (registered from `<stem>.label`
  sidecars or at runtime) maps to a fixed cluster centroid plus noise seeded
  by the payload digest, so the same bytes always encode identically.
- mock transcription: `<stem>.slices.txt` sidecar, one line per slice index.
- scripted extraction: transcript-hash -> reply sequence, falling back to the
  deterministic reference extractor for unscripted transcripts.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from . import audio as audio_mod
from .errors import BackendUnavailable, TranscriptionError
from .extraction import reference_extract, split_prompt_transcript
from .model import EMBEDDING_DIM, check_vector

logger = logging.getLogger(__name__)


@dataclass
class DetectedFace:
    vector: np.ndarray
    bbox: tuple[int, int, int, int] | None = None  # (x, y, w, h)

    @property
    def area(self) -> int:
        return self.bbox[2] * self.bbox[3] if self.bbox else 0


class FaceEncoderBackend(Protocol):
    def encode(self, image: bytes) -> list[DetectedFace]: ...


class TranscriptionBackend(Protocol):
    def transcribe(self, audio: bytes, *, source_name: str = "", slice_index: int = 0) -> str: ...


class ExtractionBackend(Protocol):
    def complete(self, prompt: str) -> str: ...


def pick_primary_face(faces: list[DetectedFace]) -> DetectedFace:
    """Largest bounding box wins when geometry is reported, else first."""
    if any(f.bbox for f in faces):
        primary = max(faces, key=lambda f: f.area)
    else:
        primary = faces[0]
    if len(faces) > 1:
        logger.info("image contained %d faces; keeping one, discarding %d",
                    len(faces), len(faces) - 1)
    return primary


def _digest(data: bytes | str) -> bytes:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).digest()


class SyntheticEncoderBackend:
    """Deterministic stand-in for a face encoder.

    Registered payloads encode to their label's cluster centroid plus small
    seeded noise; unregistered payloads contain no detectable face.
    """

    def __init__(self, noise_sigma: float = 0.02):
        self.noise_sigma = noise_sigma
        self._labels: dict[bytes, str] = {}

    @staticmethod
    def centroid(label: str) -> np.ndarray:
        seed = int.from_bytes(_digest(label)[:8], "big")
        rng = np.random.default_rng(seed)
        return rng.uniform(0.0, 1.0, EMBEDDING_DIM)

    def register(self, label: str, payload: bytes) -> None:
        self._labels[_digest(payload)] = label

    def register_dir(self, fixtures_dir: str | Path) -> int:
        """Load `<stem>.label` sidecars next to their image files."""
        count = 0
        for sidecar in sorted(Path(fixtures_dir).glob("*.label")):
            label = sidecar.read_text(encoding="utf-8").strip()
            for ext in ("jpg", "png"):
                image = sidecar.with_suffix(f".{ext}")
                if image.exists():
                    self.register(label, image.read_bytes())
                    count += 1
        return count

    def encode(self, image: bytes) -> list[DetectedFace]:
        label = self._labels.get(_digest(image))
        if label is None:
            return []
        noise_seed = int.from_bytes(_digest(label.encode() + image)[:8], "big")
        rng = np.random.default_rng(noise_seed)
        vector = self.centroid(label) + rng.normal(0.0, self.noise_sigma, EMBEDDING_DIM)
        return [DetectedFace(vector=check_vector(vector), bbox=(0, 0, 96, 96))]


class MockTranscriptionBackend:
    """Sidecar-driven transcription: `<stem>.slices.txt`, one line per slice."""

    def __init__(self, fixtures_dir: str | Path):
        self.fixtures_dir = Path(fixtures_dir)

    def lines_for(self, source_name: str) -> list[str]:
        stem = Path(source_name).stem
        path = self.fixtures_dir / f"{stem}.slices.txt"
        if not path.exists():
            return []
        return path.read_text(encoding="utf-8").rstrip("\n").split("\n")

    def transcribe(self, audio: bytes, *, source_name: str = "", slice_index: int = 0) -> str:
        lines = self.lines_for(source_name)
        if slice_index < len(lines):
            return lines[slice_index]
        return ""


class ScriptedExtractionBackend:
    """Replies keyed by sha256(transcript); each key holds a reply sequence.

    Sequences advance per call (for fault-injection scripts) and stick on the
    last reply once exhausted. Unscripted transcripts fall back to the
    reference extractor so mock-mode servers always answer.
    """

    def __init__(self, scripts: dict[str, list[str]] | None = None):
        self._scripts = dict(scripts or {})
        self._cursor: dict[str, int] = {}
        self.calls = 0

    @staticmethod
    def transcript_key(transcript: str) -> str:
        return hashlib.sha256(transcript.encode("utf-8")).hexdigest()

    def add_script(self, transcript: str, replies: list[str]) -> None:
        self._scripts[self.transcript_key(transcript)] = list(replies)

    @classmethod
    def from_corpus(cls, fixtures_dir: str | Path, window: float = 30.0,
                    overlap: float = 5.0) -> "ScriptedExtractionBackend":
        """Key each `<stem>.reply.json` by the transcript its slices produce."""
        backend = cls()
        fixtures_dir = Path(fixtures_dir)
        trans = MockTranscriptionBackend(fixtures_dir)
        for reply_file in sorted(fixtures_dir.glob("*.reply.json")):
            stem = reply_file.stem.removesuffix(".reply")
            wav = fixtures_dir / f"{stem}.wav"
            if not wav.exists():
                continue
            duration = audio_mod.wav_duration(wav.read_bytes())
            n_slices = len(audio_mod.plan_slices(duration, window, overlap))
            lines = trans.lines_for(f"{stem}.wav")
            texts = [lines[i] if i < len(lines) else "" for i in range(n_slices)]
            replies = json.loads(reply_file.read_text(encoding="utf-8"))["replies"]
            backend.add_script("\n".join(texts), replies)
        return backend

    def complete(self, prompt: str) -> str:
        self.calls += 1
        transcript = split_prompt_transcript(prompt)
        key = self.transcript_key(transcript)
        replies = self._scripts.get(key)
        if replies:
            i = self._cursor.get(key, 0)
            self._cursor[key] = i + 1
            return replies[min(i, len(replies) - 1)]
        result = reference_extract(transcript)
        return json.dumps({
            "note": result.note,
            "short_summary": result.short_summary,
            "todo": result.todos,
            "name": result.name,
        })


class HttpTranscriptionBackend:
    """POSTs WAV slice bytes to a transcription endpoint, expects {"text": ...}."""

    def __init__(self, endpoint: str, timeout: float = 60.0):
        import httpx

        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout)

    def transcribe(self, audio: bytes, *, source_name: str = "", slice_index: int = 0) -> str:
        import httpx

        try:
            resp = self._client.post(self.endpoint, content=audio,
                                     headers={"content-type": "audio/wav"})
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"transcription endpoint unreachable: {exc}") from exc
        if resp.status_code >= 500:
            raise BackendUnavailable(f"transcription endpoint returned {resp.status_code}")
        if resp.status_code != 200:
            raise TranscriptionError(f"transcription failed with {resp.status_code}")
        return resp.json().get("text", "")


class HttpExtractionBackend:
    """Chat-completion style adapter with bearer auth from the environment."""

    def __init__(self, endpoint: str, api_key_env: str = "ARSEC_LLM_KEY",
                 model: str = "gpt-4", timeout: float = 60.0):
        import os

        import httpx

        self.endpoint = endpoint
        self.model = model
        self._api_key = os.environ.get(api_key_env, "")
        self._client = httpx.Client(timeout=timeout)

    def complete(self, prompt: str) -> str:
        import httpx

        headers = {"content-type": "application/json"}
        if self._api_key:
            headers["authorization"] = f"Bearer {self._api_key}"
        body = {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        logger.info("extraction request -> %s (%d prompt chars, auth %s)",
                    self.endpoint, len(prompt), "set" if self._api_key else "absent")
        try:
            resp = self._client.post(self.endpoint, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"extraction endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailable(f"extraction endpoint returned {resp.status_code}")
        payload = resp.json()
        content = payload["choices"][0]["message"]["content"]
        logger.info("extraction reply <- %d chars", len(content))
        return content


def run_encoder_conformance(backend: FaceEncoderBackend, samples: list[bytes]) -> None:
    """Contract any encoder adapter must satisfy; raises AssertionError.

    Every returned vector has exactly 128 finite components and encoding the
    same bytes twice yields identical results.
    """
    for sample in samples:
        first = backend.encode(sample)
        for face in first:
            vec = check_vector(face.vector)
            assert vec.shape == (EMBEDDING_DIM,)
        second = backend.encode(sample)
        assert len(first) == len(second), "face count not deterministic"
        for a, b in zip(first, second):
            assert np.array_equal(a.vector, b.vector), "encoding not deterministic"
