"""Structured extraction: transcript -> {note, short_summary, todo, name}.

The live path substitutes the transcript into the secretary prompt and asks an
LLM backend for a JSON object, validating and retrying on malformed output.
``reference_extract`` is a deterministic rule-based stand-in used by tests and
offline replay; it implements the prompt's naming rules at desk scale.
"""
from __future__ import annotations

import json
import logging
import re
from collections import Counter

from .errors import EmptyTranscript, ExtractionFailed
from .model import ExtractionResult

logger = logging.getLogger(__name__)

PROMPT_TEMPLATE = """You will play the role of RANYI in the following conversations, please follow the settings strictly.

RANYI is designed to be a virtual personal secretary deployed on AR glasses. With the input of transcript provided by user, RANYI can help user to take meeting notes, make summaries and get the name of the other speaker.

Specifically, RANYI will be activated by user during a 1v1 meeting where the user is wearing AR glasses. RANYI will be given the transcript of the meeting and is expected to take meeting notes, make summaries and get the name of the other speaker.

RANYI takes the following information type as input: {inputs}

To be mentioned, the transcript input is a combination of separated transcript of overlapped slices of the meeting conversation, which means the transcript is not continuous and has some repeating contents. RANYI needs to understand the context of the transcript and organize the content to a well-structured note.

If there are more than one name mentioned in the conversation, RANYI should get the most frequent name mentioned in the conversation as the name of the other speaker.

If there are no name mentioned in the conversation, RANYI should conclude a keyword of the conversation and use the keyword as the name of the other speaker.
------
RANYI output a response in format (MUST BE IN JSON FORMAT):

```json
{
    "note": string in the format of markdown list \\\\ organize the meeting content to a well-structured note
    "short_summary": string \\\\ A short summary of the meeting, should be in one sentence
    "todo": List[string] \\\\ A list of action items that need to be done after the meeting
    "name": string \\\\ The name of the other speaker
}
"""

_INPUT_SLOT = "{inputs}"

# 50 common English function words; lowercase membership test.
STOPWORDS = frozenset("""
a about after all an and any are as at be but by can do for from has have he
her his i in is it its me my no not of on or our she so that the their them
they this to was we what will with you
""".split())

TODO_MARKERS = ("will send", "need to", "plan to", "meeting", "email")

_INTRO_RE = re.compile(
    r"\b(?:my name is|i am|i'm|i’m|this is|name is)\s+(\w+)", re.IGNORECASE
)
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+|\n+")
_WORD_RE = re.compile(r"\w+")


def build_prompt(transcript: str) -> str:
    """Substitute the transcript into the prompt template's input slot.

    A plain single-token replacement: braces in the transcript are preserved
    literally and the output is byte-stable for a given transcript.
    """
    if not transcript:
        raise EmptyTranscript("cannot build a prompt from an empty transcript")
    return PROMPT_TEMPLATE.replace(_INPUT_SLOT, transcript, 1)


def split_prompt_transcript(prompt: str) -> str:
    """Recover the transcript slot from a built prompt (mock backends use this)."""
    prefix, _, suffix = PROMPT_TEMPLATE.partition(_INPUT_SLOT)
    if not (prompt.startswith(prefix) and prompt.endswith(suffix)):
        raise ValueError("prompt does not match the template")
    return prompt[len(prefix):len(prompt) - len(suffix)]


def strip_code_fences(raw: str) -> str:
    """Drop a ``` wrapper if present; the template itself shows fenced output."""
    text = raw.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        lines = lines[1:]
        if lines and lines[-1].strip() == "```":
            lines = lines[:-1]
        text = "\n".join(lines)
    return text


def is_single_sentence(text: str) -> bool:
    """Heuristic: terminators (./!/?) may appear only at the very end."""
    t = text.rstrip()
    if not t:
        return False
    if t[-1] in ".!?":
        t = t[:-1]
    return not any(c in t for c in ".!?")


def _as_lines(value) -> list[str]:
    if isinstance(value, str):
        return [line for line in value.splitlines() if line.strip()]
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return list(value)
    raise ValueError(f"expected string or list of strings, got {type(value).__name__}")


def parse_extraction(raw: str) -> ExtractionResult:
    """Validate a backend reply against the four-field contract.

    Raises ValueError on anything malformed so extract() can retry.
    """
    try:
        payload = json.loads(strip_code_fences(raw))
    except json.JSONDecodeError as exc:
        raise ValueError(f"not a JSON object: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError("reply is not a JSON object")
    missing = {"note", "short_summary", "todo", "name"} - payload.keys()
    if missing:
        raise ValueError(f"missing fields: {sorted(missing)}")
    name = payload["name"]
    if not isinstance(name, str) or not name.strip():
        raise ValueError("name must be a non-empty string")
    summary = payload["short_summary"]
    if not isinstance(summary, str):
        raise ValueError("short_summary must be a string")
    return ExtractionResult(
        note=_as_lines(payload["note"]),
        short_summary=summary,
        todos=_as_lines(payload["todo"]),
        name=name.strip(),
    )


def extract(transcript: str, backend, retries: int = 2) -> ExtractionResult:
    """Run the prompt through the backend with validation and bounded retry.

    The backend is invoked at most retries+1 times; transport failures
    (BackendUnavailable) propagate immediately for job-level re-queueing.
    All malformed payloads are retained on the ExtractionFailed error.
    """
    if not transcript:
        raise EmptyTranscript("nothing to extract")
    prompt = build_prompt(transcript)
    rejected: list[str] = []
    for attempt in range(retries + 1):
        raw = backend.complete(prompt)
        try:
            return parse_extraction(raw)
        except ValueError as exc:
            logger.warning("extraction attempt %d malformed: %s", attempt + 1, exc)
            rejected.append(raw)
    raise ExtractionFailed(rejected)


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT_RE.split(text) if s.strip()]


def _pick_name(transcript: str) -> str:
    """Naming rules, strongest signal first.

    1. Token introduced by a self-introduction phrase ("my name is X", "I'm X").
    2. Most frequent capitalized token seen outside sentence-initial position
       and not a stopword.
    3. Keyword fallback: most frequent non-stopword, non-numeric token.
    Frequency counts cover the whole transcript; ties break by earliest first
    occurrence. The result is a pure function of the text.
    """
    tokens = [(m.group(0), m.start()) for m in _WORD_RE.finditer(transcript)]
    if not tokens:
        return ""
    counts = Counter(tok for tok, _ in tokens)
    first_pos: dict[str, int] = {}
    for tok, pos in tokens:
        first_pos.setdefault(tok, pos)

    def best(pool: set[str]) -> str:
        return max(pool, key=lambda t: (counts[t], -first_pos[t]))

    sentence_boundary = {".", "!", "?", "\n"}
    non_initial_caps: set[str] = set()
    for tok, pos in tokens:
        if not tok[0].isupper():
            continue
        i = pos - 1
        while i >= 0 and transcript[i] in " \t":
            i -= 1
        initial = i < 0 or transcript[i] in sentence_boundary
        if not initial:
            non_initial_caps.add(tok)

    candidates = {t for t in non_initial_caps if t.lower() not in STOPWORDS}

    introduced = {m.group(1) for m in _INTRO_RE.finditer(transcript)
                  if m.group(1)[0].isupper()}
    introduced &= candidates
    if introduced:
        return best(introduced)
    if candidates:
        return best(candidates)

    keywords = {t for t, _ in tokens if t.lower() not in STOPWORDS and not t.isdigit()}
    if keywords:
        return best(keywords)
    return best(set(counts))


def reference_extract(transcript: str) -> ExtractionResult:
    """Deterministic rule-based extraction used for hermetic tests and replay.

    name follows _pick_name; short_summary is the first sentence truncated to
    200 characters; note keeps up to 10 sentences as lines; todos are the
    sentences containing an action marker (case-insensitive).
    """
    if not transcript or not transcript.strip():
        raise EmptyTranscript("nothing to extract")
    sentences = _sentences(transcript)
    todos = [s for s in sentences if any(m in s.lower() for m in TODO_MARKERS)]
    return ExtractionResult(
        note=sentences[:10],
        short_summary=sentences[0][:200] if sentences else "",
        todos=todos,
        name=_pick_name(transcript),
    )
