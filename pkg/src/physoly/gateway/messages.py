"""Chat message model shared by every model backend."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Union

ROLE_SYSTEM = "system"
ROLE_USER = "user"
ROLE_ASSISTANT = "assistant"
_ROLES = (ROLE_SYSTEM, ROLE_USER, ROLE_ASSISTANT)

# Leading file bytes per supported media kind.
_MAGIC = {
    "png": b"\x89PNG\r\n\x1a\n",
    "jpeg": b"\xff\xd8\xff",
    "pdf-page": b"%PDF",
}

MIME_TYPES = {
    "png": "image/png",
    "jpeg": "image/jpeg",
    "pdf-page": "application/pdf",
}


class GatewayError(Exception):
    """Base for model backend failures."""


class GatewayTimeout(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class AuthFailure(GatewayError):
    pass


class MalformedResponse(GatewayError):
    pass


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    asset_id: str
    payload: bytes
    media_kind: str

    def __post_init__(self) -> None:
        if not self.payload:
            raise ValueError(f"image part {self.asset_id}: empty payload")
        magic = _MAGIC.get(self.media_kind)
        if magic is None:
            raise ValueError(f"image part {self.asset_id}: unknown media kind {self.media_kind!r}")
        if not self.payload.startswith(magic):
            raise ValueError(
                f"image part {self.asset_id}: payload does not look like {self.media_kind}"
            )


ContentPart = Union[TextPart, ImagePart]


@dataclass(frozen=True)
class ChatMessage:
    role: str
    parts: tuple[ContentPart, ...]

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.parts:
            raise ValueError("message needs at least one content part")
        if self.role == ROLE_SYSTEM and any(not isinstance(p, TextPart) for p in self.parts):
            raise ValueError("system messages may contain text parts only")

    @classmethod
    def text(cls, role: str, text: str) -> "ChatMessage":
        return cls(role=role, parts=(TextPart(text),))


@dataclass(frozen=True)
class ModelConfig:
    model_id: str
    temperature: float = 0.0
    max_output_tokens: int = 8192
    request_timeout: float = 120.0
    max_retries: int = 2
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be > 0")


def canonical_digest(messages: Iterable[ChatMessage]) -> str:
    """Stable hex digest of a message list.

    Text parts are hashed verbatim, image parts by payload bytes; every field
    is length-prefixed so adjacent fields cannot collide.
    """
    h = hashlib.sha256()

    def feed(tag: bytes, data: bytes) -> None:
        h.update(tag)
        h.update(str(len(data)).encode())
        h.update(b":")
        h.update(data)

    for msg in messages:
        feed(b"role", msg.role.encode())
        for part in msg.parts:
            if isinstance(part, TextPart):
                feed(b"text", part.text.encode("utf-8"))
            else:
                feed(b"image", hashlib.sha256(part.payload).digest())
    return h.hexdigest()
