from .cassette import (
    ANY_DIGEST,
    MODE_RECORD,
    MODE_REPLAY_LENIENT,
    MODE_REPLAY_STRICT,
    Cassette,
    CassetteBackend,
    CassetteEntry,
    CassetteExhausted,
    CassetteMismatch,
    CassetteRecorder,
    RecordingBackend,
)
from .live import API_KEY_ENV, LiveBackend, Transport
from .messages import (
    ROLE_ASSISTANT,
    ROLE_SYSTEM,
    ROLE_USER,
    AuthFailure,
    ChatMessage,
    ContentPart,
    GatewayError,
    GatewayTimeout,
    ImagePart,
    MalformedResponse,
    ModelConfig,
    RateLimited,
    TextPart,
    canonical_digest,
)

__all__ = [
    "ANY_DIGEST",
    "API_KEY_ENV",
    "AuthFailure",
    "Cassette",
    "CassetteBackend",
    "CassetteEntry",
    "CassetteExhausted",
    "CassetteMismatch",
    "CassetteRecorder",
    "ChatMessage",
    "ContentPart",
    "GatewayError",
    "GatewayTimeout",
    "ImagePart",
    "LiveBackend",
    "MODE_RECORD",
    "MODE_REPLAY_LENIENT",
    "MODE_REPLAY_STRICT",
    "MalformedResponse",
    "ModelConfig",
    "RateLimited",
    "RecordingBackend",
    "ROLE_ASSISTANT",
    "ROLE_SYSTEM",
    "ROLE_USER",
    "TextPart",
    "Transport",
    "canonical_digest",
]
