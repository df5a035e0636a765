"""Networked chat-completions backend with retry/backoff.

The HTTP transport is injectable so tests can count requests and script
status codes without a network. Credentials come from the environment
(``AGENT_MODEL_API_KEY``) and are never persisted.
"""

from __future__ import annotations

import base64
import io
import json
import time
from typing import Callable, Sequence

import requests

from .messages import (
    MIME_TYPES,
    AuthFailure,
    ChatMessage,
    GatewayError,
    GatewayTimeout,
    ImagePart,
    MalformedResponse,
    ModelConfig,
    RateLimited,
    TextPart,
)

API_KEY_ENV = "AGENT_MODEL_API_KEY"

# transport(url, payload, headers, timeout) -> (status_code, body_text)
Transport = Callable[[str, dict, dict, float], tuple[int, str]]


def _requests_transport(url: str, payload: dict, headers: dict, timeout: float) -> tuple[int, str]:
    try:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.Timeout as exc:
        raise GatewayTimeout(str(exc)) from exc
    except requests.RequestException as exc:
        raise GatewayError(str(exc)) from exc
    return resp.status_code, resp.text


def _downscale(payload: bytes, media_kind: str, max_dim: int) -> bytes:
    """Shrink an image so its longest side is max_dim; no-op for PDFs."""
    if media_kind == "pdf-page":
        return payload
    from PIL import Image  # optional path; imported only when downscaling

    img = Image.open(io.BytesIO(payload))
    if max(img.size) <= max_dim:
        return payload
    img.thumbnail((max_dim, max_dim))
    out = io.BytesIO()
    img.save(out, format="PNG" if media_kind == "png" else "JPEG")
    return out.getvalue()


def encode_parts(parts: Sequence, image_max_dim: int | None = None) -> list[dict]:
    encoded = []
    for part in parts:
        if isinstance(part, TextPart):
            encoded.append({"type": "text", "text": part.text})
        elif isinstance(part, ImagePart):
            payload = part.payload
            if image_max_dim is not None:
                payload = _downscale(payload, part.media_kind, image_max_dim)
            url = (
                f"data:{MIME_TYPES[part.media_kind]};base64,"
                + base64.b64encode(payload).decode("ascii")
            )
            encoded.append({"type": "image_url", "image_url": {"url": url}})
        else:
            raise TypeError(f"not a content part: {part!r}")
    return encoded


class LiveBackend:
    """Calls an HTTPS chat-completions-style endpoint.

    Transient failures (timeouts, 429, 5xx) are retried up to
    ``cfg.max_retries`` times with exponential backoff; auth failures are
    not retried. At most ``1 + max_retries`` requests go out per call.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str | None,
        transport: Transport | None = None,
        sleeper: Callable[[float], None] = time.sleep,
        image_max_dim: int | None = None,
    ):
        self._endpoint = endpoint
        self._api_key = api_key
        self._transport = transport or _requests_transport
        self._sleep = sleeper
        self._image_max_dim = image_max_dim
        self.request_count = 0

    def generate(self, messages: Sequence[ChatMessage], cfg: ModelConfig) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        if not self._api_key:
            raise AuthFailure(f"no API credential; set {API_KEY_ENV}")
        payload = {
            "model": cfg.model_id,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
            "messages": [
                {"role": m.role, "content": encode_parts(m.parts, self._image_max_dim)}
                for m in messages
            ],
        }
        headers = {"Authorization": f"Bearer {self._api_key}"}

        last_error: GatewayError = GatewayError("no request attempted")
        for attempt in range(1 + cfg.max_retries):
            if attempt:
                self._sleep(cfg.backoff_base * (2 ** (attempt - 1)))
            self.request_count += 1
            try:
                status, body = self._transport(self._endpoint, payload, headers, cfg.request_timeout)
            except GatewayTimeout as exc:
                last_error = exc
                continue
            if status == 200:
                return _extract_text(body)
            if status in (401, 403):
                raise AuthFailure(f"endpoint returned {status}")
            if status == 429:
                last_error = RateLimited("endpoint returned 429")
                continue
            if status >= 500 or status == 408:
                last_error = GatewayError(f"endpoint returned {status}")
                continue
            raise MalformedResponse(f"unexpected status {status}: {body[:200]}")
        raise last_error


def _extract_text(body: str) -> str:
    try:
        data = json.loads(body)
        content = data["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"cannot extract assistant text: {exc}") from exc
    if not isinstance(content, str):
        raise MalformedResponse(f"assistant content is not text: {type(content).__name__}")
    return content
