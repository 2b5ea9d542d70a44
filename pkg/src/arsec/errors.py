"""Exception types shared across the pipeline."""


class ArsecError(Exception):
    """Base class for all pipeline errors."""


class MalformedFilename(ArsecError):
    """Upload filename does not follow YYYYMMDD-HHMMSS.<ext>."""

    def __init__(self, name: str, field: str):
        super().__init__(f"malformed filename {name!r}: bad {field}")
        self.name = name
        self.field = field


class UnsupportedExtension(MalformedFilename):
    """Timestamp part is valid but the extension is not jpg/png/wav."""

    def __init__(self, name: str, ext: str):
        super().__init__(name, "extension")
        self.args = (f"unsupported extension {ext!r} in {name!r}",)
        self.ext = ext


class InvariantViolation(ArsecError):
    """A mutation would break a domain invariant; nothing was committed."""


class UnknownPerson(ArsecError):
    pass


class UnknownMedia(ArsecError):
    pass


class DimensionError(ArsecError):
    """Embedding vector does not have exactly 128 finite components."""


class InsufficientClasses(ArsecError):
    """Classifier training needs at least two enrolled persons."""


class StaleModel(ArsecError):
    """Classifier was trained on an older enrollment generation."""


class EmptyAudio(ArsecError):
    pass


class EmptyTranscript(ArsecError):
    pass


class TranscriptionError(ArsecError):
    """One slice failed to transcribe; retried per policy."""


class BackendUnavailable(ArsecError):
    """Backend unreachable or timed out after retries; job should be re-queued."""


class ExtractionFailed(ArsecError):
    """Every extraction attempt returned malformed output.

    Raw payloads are retained on the exception for audit.
    """

    def __init__(self, attempts: list[str]):
        super().__init__(f"extraction failed after {len(attempts)} attempts")
        self.raw_attempts = attempts


class StoreLocked(ArsecError):
    """Another process holds the data-directory lock."""
