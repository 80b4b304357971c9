# tools/llm_backends.py

"""
Chat backends used by the repair session.

  mock    deterministic trigger/response table read from a JSON file
  http    OpenAI-style chat-completion endpoint over httpx
  gemini  LangChain chat model (Gemini via langchain-google-genai)

Every backend is stateless per call, so one instance can serve concurrent sessions.
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import httpx

from core.errors import ConfigError, PredifixError
from core.repair.prompt import PromptBundle

API_KEY_ENV = "PREDIFIX_API_KEY"
BACKENDS = ("mock", "http", "gemini")


class BackendError(PredifixError):
    def __init__(self, kind: str, message: str, status: Optional[int] = None):
        super().__init__(f"{kind}: {message}")
        self.kind = kind  # "timeout" | "http" | "transport" | "malformed"
        self.status = status


class ChatBackend(Protocol):
    name: str

    def complete(self, prompt: PromptBundle) -> str:
        ...


@dataclass(frozen=True)
class MockRule:
    trigger_substring: str
    response: str


class MockBackend:
    """First rule whose trigger occurs in the user text wins; otherwise the default response."""

    name = "mock"

    def __init__(self, rules=(), default_response: str = "", logger: Optional[logging.Logger] = None):
        self.rules = tuple(rules)
        self.default_response = default_response
        self.logger = logger or logging.getLogger("predifix")

    @classmethod
    def from_file(cls, path, logger: Optional[logging.Logger] = None) -> "MockBackend":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            rules = [MockRule(r["trigger_substring"], r["response"]) for r in data.get("rules", [])]
            default = data.get("default_response", "")
        except (OSError, json.JSONDecodeError, KeyError, TypeError, AttributeError) as e:
            raise ConfigError(f"Invalid mock backend config {path}: {e}")
        return cls(rules, default, logger)

    def complete(self, prompt: PromptBundle) -> str:
        for rule in self.rules:
            if rule.trigger_substring in prompt.user_text:
                self.logger.debug(f"Mock backend matched trigger {rule.trigger_substring!r}")
                return rule.response
        return self.default_response


class HttpBackend:
    """POSTs a chat-completion request; transient failures (timeouts, 5xx, 429) are retried."""

    name = "http"

    def __init__(self, url: str, model: str, api_key: str, timeout: float = 60.0, retries: int = 1,
                 transport: Optional[httpx.BaseTransport] = None, logger: Optional[logging.Logger] = None):
        if not url:
            raise ConfigError("LLM_URL must be set for the http backend.")
        self.url = url
        self.model = model
        self.retries = max(0, retries)
        self.logger = logger or logging.getLogger("predifix")
        self._client = httpx.Client(
            timeout=timeout,
            transport=transport,
            headers={"Authorization": f"Bearer {api_key}"},
        )

    def _payload(self, prompt: PromptBundle) -> dict:
        return {
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        }

    def _once(self, payload: dict) -> str:
        try:
            response = self._client.post(self.url, json=payload)
        except httpx.TimeoutException as e:
            raise BackendError("timeout", str(e) or "request timed out")
        except httpx.TransportError as e:
            raise BackendError("transport", str(e))
        if response.status_code != 200:
            raise BackendError("http", f"status {response.status_code}", status=response.status_code)
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise BackendError("malformed", f"unexpected response body: {e}", status=response.status_code)
        if not isinstance(content, str):
            raise BackendError("malformed", "message content is not text", status=response.status_code)
        return content

    @staticmethod
    def _transient(error: BackendError) -> bool:
        return error.kind in ("timeout", "transport") or (
            error.status is not None and (error.status >= 500 or error.status == 429)
        )

    def complete(self, prompt: PromptBundle) -> str:
        payload = self._payload(prompt)
        attempt = 0
        while True:
            try:
                return self._once(payload)
            except BackendError as e:
                if attempt >= self.retries or not self._transient(e):
                    raise
                attempt += 1
                self.logger.warning(f"LLM request failed ({e}); retrying ({attempt}/{self.retries})")

    def close(self):
        self._client.close()


class LangChainBackend:
    """Any LangChain chat model; used with Gemini in production and fake models in tests."""

    name = "gemini"

    def __init__(self, llm, logger: Optional[logging.Logger] = None):
        self.llm = llm
        self.logger = logger or logging.getLogger("predifix")

    def complete(self, prompt: PromptBundle) -> str:
        try:
            message = self.llm.invoke(prompt.messages())
        except Exception as e:
            self.logger.error(f"LLM error: {e}", exc_info=True)
            raise BackendError("transport", str(e))
        content = getattr(message, "content", message)
        if not isinstance(content, str):
            raise BackendError("malformed", "model returned non-text content")
        return content


def create_backend(config, name: Optional[str] = None, logger: Optional[logging.Logger] = None) -> ChatBackend:
    """Build the backend named `name` (default config.BACKEND). Raises ConfigError."""
    name = name or config.BACKEND
    if name == "mock":
        if not config.MOCK_CONFIG:
            raise ConfigError("The mock backend needs --mock-config (MOCK_CONFIG).")
        return MockBackend.from_file(config.MOCK_CONFIG, logger)
    if name == "http":
        api_key = os.getenv(API_KEY_ENV)
        if not api_key:
            raise ConfigError(f"Missing required environment variable: {API_KEY_ENV}")
        return HttpBackend(config.LLM_URL, config.LLM_MODEL, api_key,
                           timeout=config.LLM_TIMEOUT, retries=config.LLM_RETRIES, logger=logger)
    if name == "gemini":
        return LangChainBackend(config.init_llm(), logger)
    raise ConfigError(f"Unknown backend {name!r}; choose one of {', '.join(BACKENDS)}")
