from __future__ import annotations

import base64
import json

import pytest

from physoly.gateway import (
    AuthFailure,
    Cassette,
    CassetteBackend,
    CassetteEntry,
    CassetteExhausted,
    CassetteMismatch,
    CassetteRecorder,
    ChatMessage,
    GatewayError,
    GatewayTimeout,
    ImagePart,
    LiveBackend,
    MalformedResponse,
    ModelConfig,
    RateLimited,
    RecordingBackend,
    TextPart,
    canonical_digest,
)
from physoly.gateway.live import encode_parts

from conftest import PNG_BYTES

CFG = ModelConfig(model_id="test-model", max_retries=2, backoff_base=0.0)


def msg(text: str) -> list[ChatMessage]:
    return [ChatMessage.text("user", text)]


def ok_body(text: str) -> str:
    return json.dumps({"choices": [{"message": {"content": text}}]})


class ScriptedTransport:
    """Returns scripted (status, body) pairs and counts requests."""

    def __init__(self, results):
        self.results = list(results)
        self.requests = 0
        self.payloads = []

    def __call__(self, url, payload, headers, timeout):
        self.requests += 1
        self.payloads.append(payload)
        result = self.results.pop(0)
        if isinstance(result, Exception):
            raise result
        return result


# --- message model ---------------------------------------------------------


def test_system_message_rejects_image_parts():
    with pytest.raises(ValueError):
        ChatMessage(role="system", parts=(ImagePart("a", PNG_BYTES, "png"),))


def test_image_part_validates_magic_bytes():
    with pytest.raises(ValueError):
        ImagePart("a", b"definitely not a png", "png")
    with pytest.raises(ValueError):
        ImagePart("a", b"", "png")


def test_message_requires_parts():
    with pytest.raises(ValueError):
        ChatMessage(role="user", parts=())


# --- canonical digest -------------------------------------------------------


def test_digest_deterministic():
    a = [ChatMessage.text("system", "s"), ChatMessage.text("user", "hello")]
    b = [ChatMessage.text("system", "s"), ChatMessage.text("user", "hello")]
    assert canonical_digest(a) == canonical_digest(b)


def test_digest_sensitive_to_one_character():
    a = canonical_digest(msg("hello"))
    b = canonical_digest(msg("hello!"))
    assert a != b


def test_digest_sensitive_to_image_payload():
    img1 = ImagePart("a", PNG_BYTES, "png")
    img2 = ImagePart("a", PNG_BYTES[:-1] + bytes([PNG_BYTES[-1] ^ 1]), "png")
    m1 = [ChatMessage(role="user", parts=(img1, TextPart("q")))]
    m2 = [ChatMessage(role="user", parts=(img2, TextPart("q")))]
    assert canonical_digest(m1) != canonical_digest(m2)


def test_digest_frozen_value():
    # frozen: if this drifts, previously recorded cassettes stop replaying
    assert canonical_digest(msg("hello")) == (
        "5ad5cdcf0d05148ce3e330bbf0b8a675c0680f3e6f831265c17798f043e806e2"
    )


# --- cassette replay ---------------------------------------------------------


def test_replay_returns_recorded_text_byte_identical():
    backend = CassetteBackend(Cassette.from_responses(["résult précis\n"]))
    assert backend.generate(msg("q"), CFG) == "résult précis\n"


def test_replay_strict_rejects_mismatched_digest():
    cassette = Cassette(entries=[CassetteEntry(0, "0" * 64, "r")], mode="replay-strict")
    with pytest.raises(CassetteMismatch):
        CassetteBackend(cassette).generate(msg("q"), CFG)


def test_replay_lenient_ignores_digest():
    cassette = Cassette(entries=[CassetteEntry(0, "0" * 64, "r")], mode="replay-lenient")
    assert CassetteBackend(cassette).generate(msg("q"), CFG) == "r"


def test_replay_strict_accepts_matching_digest():
    cassette = Cassette(entries=[CassetteEntry(0, canonical_digest(msg("q")), "r")])
    assert CassetteBackend(cassette).generate(msg("q"), CFG) == "r"


def test_replay_exhausted():
    backend = CassetteBackend(Cassette.from_responses(["only one"]))
    backend.generate(msg("q"), CFG)
    with pytest.raises(CassetteExhausted):
        backend.generate(msg("q"), CFG)


def test_cassette_save_load_round_trip(tmp_path):
    cassette = Cassette(entries=[CassetteEntry(0, "d" * 64, 'line1\nline2 "quoted"')])
    path = tmp_path / "c.jsonl"
    cassette.save(path)
    loaded = Cassette.load(path)
    assert loaded.entries == cassette.entries


def test_recorder_and_replay_round_trip(tmp_path):
    path = tmp_path / "rec.jsonl"
    recorder = CassetteRecorder(path)
    inner = CassetteBackend(Cassette.from_responses(["first", "second"]))
    backend = RecordingBackend(inner, recorder)
    assert backend.generate(msg("a"), CFG) == "first"
    assert backend.generate(msg("b"), CFG) == "second"

    replay = CassetteBackend(Cassette.load(path))
    assert replay.generate(msg("a"), CFG) == "first"
    assert replay.generate(msg("b"), CFG) == "second"
    # and strict mode catches a drifted prompt
    replay2 = CassetteBackend(Cassette.load(path))
    with pytest.raises(CassetteMismatch):
        replay2.generate(msg("DIFFERENT"), CFG)


# --- live backend -------------------------------------------------------------


def test_live_success_single_request():
    transport = ScriptedTransport([(200, ok_body("answer"))])
    backend = LiveBackend("https://x", "key", transport=transport, sleeper=lambda s: None)
    assert backend.generate(msg("q"), CFG) == "answer"
    assert transport.requests == 1


def test_live_retry_bound_is_one_plus_max_retries():
    transport = ScriptedTransport([(500, ""), (500, ""), (500, ""), (500, "")])
    backend = LiveBackend("https://x", "key", transport=transport, sleeper=lambda s: None)
    with pytest.raises(GatewayError):
        backend.generate(msg("q"), ModelConfig(model_id="m", max_retries=2, backoff_base=0.0))
    assert transport.requests == 3  # 1 + max_retries


def test_live_retries_rate_limit_then_succeeds():
    transport = ScriptedTransport([(429, ""), (200, ok_body("ok"))])
    backend = LiveBackend("https://x", "key", transport=transport, sleeper=lambda s: None)
    assert backend.generate(msg("q"), CFG) == "ok"
    assert transport.requests == 2


def test_live_rate_limited_exhausts_to_error():
    transport = ScriptedTransport([(429, "")] * 3)
    backend = LiveBackend("https://x", "key", transport=transport, sleeper=lambda s: None)
    with pytest.raises(RateLimited):
        backend.generate(msg("q"), CFG)


def test_live_auth_failure_no_retry():
    transport = ScriptedTransport([(401, "")])
    backend = LiveBackend("https://x", "bad-key", transport=transport, sleeper=lambda s: None)
    with pytest.raises(AuthFailure):
        backend.generate(msg("q"), CFG)
    assert transport.requests == 1


def test_live_missing_key_fails_before_any_request():
    transport = ScriptedTransport([])
    backend = LiveBackend("https://x", None, transport=transport)
    with pytest.raises(AuthFailure):
        backend.generate(msg("q"), CFG)
    assert transport.requests == 0


def test_live_timeout_retries():
    transport = ScriptedTransport([GatewayTimeout("t"), (200, ok_body("late"))])
    backend = LiveBackend("https://x", "key", transport=transport, sleeper=lambda s: None)
    assert backend.generate(msg("q"), CFG) == "late"


def test_live_malformed_response():
    transport = ScriptedTransport([(200, "not json at all")])
    backend = LiveBackend("https://x", "key", transport=transport)
    with pytest.raises(MalformedResponse):
        backend.generate(msg("q"), CFG)


def test_live_backoff_grows_exponentially():
    sleeps = []
    transport = ScriptedTransport([(500, ""), (500, ""), (500, ""), (500, "")])
    backend = LiveBackend("https://x", "key", transport=transport, sleeper=sleeps.append)
    with pytest.raises(GatewayError):
        backend.generate(msg("q"), ModelConfig(model_id="m", max_retries=3, backoff_base=0.5))
    assert sleeps == [0.5, 1.0, 2.0]


def test_image_payload_reaches_wire_unchanged():
    parts = (ImagePart("fig", PNG_BYTES, "png"), TextPart("what is this?"))
    encoded = encode_parts(parts)
    url = encoded[0]["image_url"]["url"]
    prefix = "data:image/png;base64,"
    assert url.startswith(prefix)
    assert base64.b64decode(url[len(prefix):]) == PNG_BYTES
    assert encoded[1] == {"type": "text", "text": "what is this?"}


def test_image_downscale_only_when_configured():
    transport = ScriptedTransport([(200, ok_body("seen"))])
    backend = LiveBackend("https://x", "key", transport=transport)
    messages = [ChatMessage(role="user", parts=(ImagePart("fig", PNG_BYTES, "png"), TextPart("q")))]
    backend.generate(messages, CFG)
    sent = transport.payloads[0]["messages"][0]["content"][0]["image_url"]["url"]
    assert base64.b64decode(sent.split(",", 1)[1]) == PNG_BYTES
