"""Runtime configuration: validated at load, unknown keys rejected.

Defaults (all overridable via a JSON config file or CLI flags):

- listen: 127.0.0.1:8087          HTTP bind address
- data_dir: ./data                store root (sqlite + media payloads)
- tau: 0.6                        face match distance threshold
- association_window_s: 120       image -> audio association window
- slice_window_s: 30              audio slice length
- slice_overlap_s: 5              audio slice overlap
- workers: 2                      job queue worker threads
- max_attempts: 3                 job attempts before dead
- sweep_interval_s: 30            pending-identity expiry sweep period
- transcribe_parallelism: 4       concurrent slice transcriptions
- extract_retries: 2              extraction retries on malformed output
- backend_timeout_s: 60           HTTP backend call timeout
- max_upload_bytes: 52428800      media upload cap (50 MB)
- enroll_cap: 20                  embeddings kept per person (oldest evicted)
- fixtures_dir: null              sidecar fixtures for mock backends
- ui_dir: null                    static assets served at / (console build)
- device_token_env: ARSEC_DEVICE_TOKEN   env var holding the device bearer token
- backends.encoder / .transcription / .extraction:
    mode: mock | http             (mock is the default everywhere)
    endpoint: null                http mode target URL
    api_key_env: ARSEC_LLM_KEY    bearer token env var (extraction http mode)
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class BackendConfig:
    mode: str = "mock"
    endpoint: str | None = None
    api_key_env: str = "ARSEC_LLM_KEY"


@dataclass
class Config:
    listen: str = "127.0.0.1:8087"
    data_dir: str = "./data"
    tau: float = 0.6
    association_window_s: float = 120.0
    slice_window_s: float = 30.0
    slice_overlap_s: float = 5.0
    workers: int = 2
    max_attempts: int = 3
    sweep_interval_s: float = 30.0
    transcribe_parallelism: int = 4
    extract_retries: int = 2
    backend_timeout_s: float = 60.0
    max_upload_bytes: int = 50 * 1024 * 1024
    enroll_cap: int = 20
    fixtures_dir: str | None = None
    ui_dir: str | None = None
    device_token_env: str = "ARSEC_DEVICE_TOKEN"
    backends: dict = field(default_factory=dict)

    def __post_init__(self):
        parsed = {}
        for stage in ("encoder", "transcription", "extraction"):
            raw = self.backends.get(stage, {})
            if isinstance(raw, BackendConfig):
                parsed[stage] = raw
                continue
            unknown = set(raw) - {"mode", "endpoint", "api_key_env"}
            if unknown:
                raise ConfigError(f"unknown config key: backends.{stage}.{sorted(unknown)[0]}")
            parsed[stage] = BackendConfig(**raw)
        extra = set(self.backends) - {"encoder", "transcription", "extraction"}
        if extra:
            raise ConfigError(f"unknown config key: backends.{sorted(extra)[0]}")
        self.backends = parsed
        self.validate()

    def validate(self) -> None:
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")
        if self.association_window_s <= 0:
            raise ConfigError("association_window_s must be > 0")
        if not (0 <= self.slice_overlap_s < self.slice_window_s):
            raise ConfigError("need 0 <= slice_overlap_s < slice_window_s")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")
        if self.max_upload_bytes < 1:
            raise ConfigError("max_upload_bytes must be >= 1")
        for stage, backend in self.backends.items():
            if backend.mode not in ("mock", "http"):
                raise ConfigError(f"backends.{stage}.mode must be mock or http")
            if backend.mode == "http" and not backend.endpoint:
                raise ConfigError(f"backends.{stage}.endpoint required in http mode")

    def backend(self, stage: str) -> BackendConfig:
        return self.backends[stage]

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides) -> "Config":
        """Read a JSON config file, apply overrides, reject unknown keys."""
        data: dict = {}
        if path is not None:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            if not isinstance(data, dict):
                raise ConfigError("config file must hold a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key: {sorted(unknown)[0]}")
        return cls(**data)
