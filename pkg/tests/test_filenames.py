from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from arsec.errors import MalformedFilename, UnsupportedExtension
from arsec.model import format_media_filename, parse_media_filename


def test_image_filename_parses():
    kind, captured = parse_media_filename("20240514-130522.jpg")
    assert kind == "image"
    assert captured == datetime(2024, 5, 14, 13, 5, 22, tzinfo=timezone.utc)


def test_audio_filename_parses():
    kind, captured = parse_media_filename("20240514-130525.wav")
    assert kind == "audio"
    assert captured == datetime(2024, 5, 14, 13, 5, 25, tzinfo=timezone.utc)


def test_png_is_image():
    assert parse_media_filename("20240514-130522.png")[0] == "image"


def test_unsupported_stem_rejected():
    with pytest.raises(MalformedFilename) as exc:
        parse_media_filename("hello.txt")
    assert exc.value.field == "timestamp"


def test_good_stem_bad_extension_is_distinguishable():
    with pytest.raises(UnsupportedExtension) as exc:
        parse_media_filename("20240514-130522.txt")
    assert exc.value.ext == "txt"
    assert isinstance(exc.value, MalformedFilename)


@pytest.mark.parametrize("name", [
    "",
    "20240514130522.jpg",
    "2024-05-14-130522.jpg",
    "20241332-130522.jpg",   # month 13
    "20240514-250522.jpg",   # hour 25
    "20240514-130522",
    "20240514-130522.",
])
def test_malformed_names_rejected(name):
    with pytest.raises(MalformedFilename):
        parse_media_filename(name)


@given(
    st.datetimes(
        min_value=datetime(1970, 1, 2),
        max_value=datetime(2200, 12, 31),
    ).map(lambda d: d.replace(microsecond=0, tzinfo=timezone.utc)),
    st.sampled_from(["jpg", "png", "wav"]),
)
def test_round_trip(captured, ext):
    name = format_media_filename(captured, "image" if ext != "wav" else "audio", ext)
    kind, parsed = parse_media_filename(name)
    assert parsed == captured
    assert format_media_filename(parsed, kind, ext) == name


def test_format_rejects_kind_extension_mismatch():
    with pytest.raises(ValueError):
        format_media_filename(datetime.now(timezone.utc), "image", "wav")
