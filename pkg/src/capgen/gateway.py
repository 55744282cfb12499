"""Chat-completion gateway: live HTTP endpoint or deterministic fixture replay.

The live gateway speaks the ubiquitous chat-completions JSON shape (messages
array in, ``choices[0].message.content`` out) and never alters completion
text; sanitization is the recovery module's job. Replay mode serves recorded
fixtures keyed by prompt hash, byte-identically.
"""

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .prompting import prompt_hash

ENV_ENDPOINT_URL = "CAPGEN_ENDPOINT_URL"
ENV_API_KEY = "CAPGEN_API_KEY"

FINISH_STOP = "stop"
FINISH_LENGTH = "length"
FINISH_ERROR = "error"


class GatewayError(Exception):
    pass


class EndpointError(GatewayError):
    pass


class FixtureMissingError(GatewayError):
    pass


class FixtureConflictError(GatewayError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    system_message: str
    user_message: str
    temperature: float = 0.8
    max_tokens: int = 4096
    model_name: str = "local-model"

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if not self.system_message and not self.user_message:
            raise ValueError("messages must be non-empty")

    @property
    def hash(self) -> str:
        return prompt_hash(self.system_message, self.user_message)


@dataclass(frozen=True)
class ChatResponse:
    raw_text: str
    finish_reason: str
    latency_ms: int


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    api_key: str = ""
    retry_limit: int = 2
    timeout_s: float = 300.0
    backoff_s: float = 1.0
    max_concurrency: int = 2


def env_endpoint_config(**overrides) -> EndpointConfig:
    url = os.environ.get(ENV_ENDPOINT_URL, "")
    if not url:
        raise EndpointError(f"{ENV_ENDPOINT_URL} is not set")
    return EndpointConfig(url=url, api_key=os.environ.get(ENV_API_KEY, ""), **overrides)


class HttpGateway:
    """One completion per call against a chat-completions endpoint.

    Transient failures (connection errors, timeouts, HTTP 429/5xx) are
    retried with exponential backoff; at most 1 + retry_limit requests are
    ever issued per complete() call.
    """

    def __init__(self, config: EndpointConfig):
        self.config = config
        self._semaphore = threading.Semaphore(config.max_concurrency)

    def complete(self, request: ChatRequest) -> ChatResponse:
        payload = {
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": request.system_message},
                {"role": "user", "content": request.user_message},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"

        last_error = None
        started = time.monotonic()
        for attempt in range(1 + self.config.retry_limit):
            if attempt:
                time.sleep(self.config.backoff_s * (2 ** (attempt - 1)))
            try:
                with self._semaphore:
                    response = requests.post(
                        self.config.url,
                        json=payload,
                        headers=headers,
                        timeout=self.config.timeout_s,
                    )
            except requests.RequestException as exc:
                last_error = f"request failed: {exc}"
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = f"endpoint returned HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise EndpointError(f"endpoint returned HTTP {response.status_code}")
            return self._parse(response, started)
        raise EndpointError(f"endpoint failure after {1 + self.config.retry_limit} requests: {last_error}")

    def _parse(self, response, started) -> ChatResponse:
        latency_ms = int((time.monotonic() - started) * 1000)
        try:
            body = response.json()
            choice = body["choices"][0]
            content = choice["message"]["content"]
            finish = choice.get("finish_reason") or FINISH_STOP
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EndpointError(f"malformed response body: {exc}") from exc
        if not isinstance(content, str):
            raise EndpointError("malformed response body: content is not text")
        return ChatResponse(
            raw_text=content,
            finish_reason=FINISH_LENGTH if finish == "length" else FINISH_STOP,
            latency_ms=latency_ms,
        )


class ReplayGateway:
    """Serve recorded completions keyed by prompt hash, byte-identically."""

    def __init__(self, fixture_dir):
        self.fixture_dir = Path(fixture_dir)

    def complete(self, request: ChatRequest) -> ChatResponse:
        path = self.fixture_dir / f"{request.hash}.txt"
        if not path.exists():
            raise FixtureMissingError(f"fixture missing for prompt hash {request.hash}")
        return ChatResponse(
            raw_text=path.read_text(encoding="utf-8"),
            finish_reason=FINISH_STOP,
            latency_ms=0,
        )


def record_fixture(store_path, prompt_digest: str, raw_text: str, overwrite: bool = False):
    """Persist a completion so replay returns it byte-identically."""
    store = Path(store_path)
    try:
        store.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise GatewayError(f"unwritable fixture store {store}: {exc}") from exc
    path = store / f"{prompt_digest}.txt"
    if path.exists() and not overwrite:
        existing = path.read_text(encoding="utf-8")
        if existing != raw_text:
            raise FixtureConflictError(
                f"fixture conflict for {prompt_digest}: refusing to overwrite"
            )
        return
    try:
        path.write_text(raw_text, encoding="utf-8")
    except OSError as exc:
        raise GatewayError(f"unwritable fixture store {store}: {exc}") from exc
