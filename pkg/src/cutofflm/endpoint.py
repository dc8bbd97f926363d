"""Client for an external chat-completions endpoint.

Used for the pluggable time-sensitivity classifier and the finance teacher.
The endpoint speaks a chat-completions-style JSON protocol over a
configurable base URL; credentials come from an environment variable.
"""

from __future__ import annotations

import os
import time

import httpx

DEFAULT_API_KEY_ENV = "CUTOFFLM_API_KEY"


class EndpointError(Exception):
    """The endpoint was unreachable or kept failing after retries."""


class ChatEndpointClient:
    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 30.0,
        max_retries: int = 2,
        backoff_seconds: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds
        headers = {}
        api_key = os.environ.get(api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=self.base_url, timeout=timeout, headers=headers, transport=transport
        )

    def complete(self, messages: list[dict], temperature: float = 0.0) -> str:
        """Return the assistant message content; retries transport/5xx failures."""
        body = {"model": self.model, "messages": messages, "temperature": temperature}
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_seconds * (2 ** (attempt - 1)))
            try:
                resp = self._client.post("/chat/completions", json=body)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = EndpointError(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise EndpointError(f"endpoint returned {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise EndpointError(f"malformed endpoint response: {exc}") from exc
        raise EndpointError(f"endpoint unreachable after {self.max_retries + 1} attempts: {last_error}")

    def close(self) -> None:
        self._client.close()
