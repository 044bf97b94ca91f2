"""Chat-completion client with a content-addressed replay cache.

Requests go out as a JSON POST with ``messages = [system, user]``, which is
what OpenAI-compatible servers and local runtimes such as Ollama accept. The
replay cache makes a whole analysis run a pure function of its inputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Sequence

import httpx

from mathinterp.errors import (
    EndpointUnreachable,
    GatewayError,
    HttpError,
    OverrideEmpty,
    ReplayMiss,
    Timeout,
)

log = logging.getLogger(__name__)

DEFAULT_SYSTEM_PROMPT = (
    "You are a undergrad student taking an exam. "
    "Answer each question thoroughly, completely and show all steps.\n"
    "Do NOT use LaTeX or math markup of any kind. Use plain, human readable math notation only "
    "(e.g., f(x) = x^2/4, not \\frac{x^2}{4}).\n"
    "Do not include any $$, \\( \\), or backslashes. "
    "Write math as it would appear on paper using keyboard characters."
)
CONTEXT_SEPARATOR = "\n\n---\n"


def build_system_prompt(override: str | None = None, context_preamble: str | None = None) -> str:
    """System-role text; the exam protocol unless explicitly overridden."""
    if override is not None and not override.strip():
        raise OverrideEmpty("system prompt override is empty")
    text = override if override is not None else DEFAULT_SYSTEM_PROMPT
    if context_preamble:
        text = text + CONTEXT_SEPARATOR + context_preamble
    return text


@dataclass(frozen=True)
class EndpointConfig:
    url: str = "http://localhost:11434"
    path: str = "/v1/chat/completions"
    model: str = "gemma3:latest"
    temperature: float = 0.0
    max_tokens: int | None = None
    parallelism: int = 1
    timeout_ms: int = 120_000
    auth_env: str = "MATHINTERP_API_KEY"
    retries: int = 3
    backoff_s: float = 0.5


@dataclass(frozen=True)
class CompletionRequest:
    model_name: str
    user_text: str
    system_text: str = DEFAULT_SYSTEM_PROMPT
    temperature: float = 0.0
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if not self.user_text or not self.user_text.strip():
            raise ValueError("user_text must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class Source(str, Enum):
    LIVE = "live"
    REPLAY = "replay"


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    latency_ms: float
    source: Source


@dataclass(frozen=True)
class TrialFailure:
    index: int
    request: CompletionRequest
    error_type: str
    message: str

    def to_dict(self) -> dict[str, Any]:
        return {"index": self.index, "error_type": self.error_type, "message": self.message}


def cache_key(request: CompletionRequest) -> str:
    payload = [request.model_name, request.system_text, request.user_text, float(request.temperature)]
    return hashlib.sha256(json.dumps(payload, ensure_ascii=False).encode("utf-8")).hexdigest()


@dataclass
class ReplayCache:
    """Layout: ``<root>/<first two hex digits>/<digest>.json``."""

    root: Path

    def __post_init__(self) -> None:
        self.root = Path(self.root)

    def path_for(self, request: CompletionRequest) -> Path:
        digest = cache_key(request)
        return self.root / digest[:2] / f"{digest}.json"

    def get(self, request: CompletionRequest) -> str | None:
        path = self.path_for(request)
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        return entry["response"]["text"]

    def put(self, request: CompletionRequest, text: str, raw: Any = None) -> Path:
        path = self.path_for(request)
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "key": path.stem,
            "request": asdict(request),
            "response": {"text": text, "raw": raw},
        }
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False, indent=2, sort_keys=True)
                fh.write("\n")
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return path

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*/*.json")) if self.root.exists() else 0


def _extract_text(body: Any) -> str:
    if isinstance(body, dict):
        if body.get("choices"):
            choice = body["choices"][0]
            message = choice.get("message") or {}
            return message.get("content") or choice.get("text") or ""
        if isinstance(body.get("message"), dict):
            return body["message"].get("content") or ""
        if isinstance(body.get("response"), str):
            return body["response"]
    return ""


@dataclass
class LLMClient:
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    cache: ReplayCache | None = None
    replay_only: bool = False
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep
    _http: httpx.Client | None = field(default=None, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def request(self, user_text: str, system_text: str = DEFAULT_SYSTEM_PROMPT) -> CompletionRequest:
        return CompletionRequest(
            model_name=self.endpoint.model,
            user_text=user_text,
            system_text=system_text,
            temperature=self.endpoint.temperature,
            max_tokens=self.endpoint.max_tokens,
        )

    def _client(self) -> httpx.Client:
        with self._lock:
            if self._http is None:
                self._http = self._new_http()
            return self._http

    def _new_http(self) -> httpx.Client:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.endpoint.auth_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return httpx.Client(
            base_url=self.endpoint.url,
            headers=headers,
            timeout=self.endpoint.timeout_ms / 1000,
            transport=self.transport,
        )

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    def _post(self, request: CompletionRequest) -> tuple[str, Any]:
        payload: dict[str, Any] = {
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "stream": False,
        }
        if request.max_tokens is not None:
            payload["max_tokens"] = request.max_tokens
        try:
            resp = self._client().post(self.endpoint.path, json=payload)
        except httpx.TimeoutException as exc:
            raise Timeout(f"request to {self.endpoint.url} timed out") from exc
        except httpx.TransportError as exc:
            raise EndpointUnreachable(f"cannot reach {self.endpoint.url}: {exc}") from exc
        if resp.status_code >= 400:
            raise HttpError(resp.status_code, resp.text)
        try:
            body = resp.json()
        except ValueError as exc:
            raise GatewayError(f"endpoint returned invalid JSON: {exc}") from exc
        text = _extract_text(body)
        if not text.strip():
            raise GatewayError("endpoint returned an empty completion")
        return text, body

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        started = time.perf_counter()
        if self.cache is not None:
            cached = self.cache.get(request)
            if cached is not None:
                return CompletionResponse(cached, (time.perf_counter() - started) * 1000, Source.REPLAY)
        if self.replay_only:
            raise ReplayMiss(f"no cached response for request {cache_key(request)[:12]}")
        text, body = self._post(request)
        if self.cache is not None:
            self.cache.put(request, text, body)
        return CompletionResponse(text, (time.perf_counter() - started) * 1000, Source.LIVE)

    def complete_with_retry(self, request: CompletionRequest) -> CompletionResponse:
        attempts = max(1, self.endpoint.retries)
        for attempt in range(attempts):
            try:
                return self.complete(request)
            except GatewayError as exc:
                if not exc.retryable or attempt == attempts - 1:
                    raise
                delay = self.endpoint.backoff_s * 2**attempt
                log.warning("attempt %d failed (%s); retrying in %.2fs", attempt + 1, exc, delay)
                self.sleep(delay)
        raise AssertionError("unreachable")

    def run_trials(
        self, requests: Sequence[CompletionRequest], parallelism: int | None = None
    ) -> list[CompletionResponse | TrialFailure]:
        """Run requests with at most ``parallelism`` in flight; results keep request order."""
        parallelism = self.endpoint.parallelism if parallelism is None else parallelism
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")

        def run(index: int) -> CompletionResponse | TrialFailure:
            try:
                return self.complete_with_retry(requests[index])
            except GatewayError as exc:
                return TrialFailure(index, requests[index], type(exc).__name__, str(exc))

        if parallelism == 1:
            return [run(i) for i in range(len(requests))]
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(run, range(len(requests))))


def complete(
    request: CompletionRequest,
    endpoint: EndpointConfig,
    cache: ReplayCache | None = None,
    replay_only: bool = False,
) -> CompletionResponse:
    client = LLMClient(endpoint, cache, replay_only)
    try:
        return client.complete(request)
    finally:
        client.close()
