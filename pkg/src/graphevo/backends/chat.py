"""Chat-completion HTTP backend."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import httpx

from ..errors import ConfigError, TransportError
from ..validation import RawOutput
from .base import OperatorBackend, OperatorRequest
from .prompts import RepairPrompt

log = logging.getLogger(__name__)

RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass
class ChatEndpointConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    temperature: float = 0.8
    timeout: float = 60.0
    max_retries: int = 3
    credential_env: str = "GRAPHEVO_API_KEY"
    path: str = "/chat/completions"
    response_path: str = "choices.0.message.content"
    backoff: float = 1.0
    extra_body: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_retries < 0 or self.timeout <= 0:
            raise ConfigError("max_retries must be >= 0 and timeout > 0")

    def to_dict(self) -> dict:
        # Only the variable name is echoed, never its value.
        return asdict(self)


def redact(text: str, secret: Optional[str]) -> str:
    if secret:
        text = text.replace(secret, "***")
    return text


def _dig(payload, path: str):
    cur = payload
    for part in path.split("."):
        if isinstance(cur, list):
            cur = cur[int(part)]
        else:
            cur = cur[part]
    return cur


class ChatBackend(OperatorBackend):
    """Sends each operator prompt as one user message and returns the reply text."""

    name = "chat"
    supports_repair = True

    def __init__(self, config: ChatEndpointConfig, client: Optional[httpx.Client] = None, sleep=time.sleep):
        self.config = config
        self.model = config.model
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep
        self.requests_sent = 0

    def _credential(self) -> Optional[str]:
        return os.environ.get(self.config.credential_env) or None

    def complete(self, content: str) -> str:
        cfg = self.config
        body = {
            "model": cfg.model,
            "temperature": cfg.temperature,
            "messages": [{"role": "user", "content": content}],
            **cfg.extra_body,
        }
        headers = {"Content-Type": "application/json"}
        key = self._credential()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = cfg.base_url.rstrip("/") + "/" + cfg.path.lstrip("/")
        last = "no attempt made"
        attempts = cfg.max_retries + 1
        for attempt in range(1, attempts + 1):
            self.requests_sent += 1
            log.debug("POST %s model=%s attempt=%d/%d auth=%s", url, cfg.model, attempt, attempts, "***" if key else "none")
            try:
                resp = self._client.post(url, json=body, headers=headers, timeout=cfg.timeout)
            except httpx.TimeoutException as exc:
                last = f"timeout: {exc}"
            except httpx.TransportError as exc:
                last = f"transport error: {exc}"
            else:
                if resp.status_code == 200:
                    try:
                        return str(_dig(resp.json(), cfg.response_path))
                    except (KeyError, IndexError, ValueError, TypeError) as exc:
                        raise TransportError(f"unexpected response shape: {exc}", attempt) from None
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code not in RETRY_STATUS:
                    log.warning("chat request failed: %s", redact(last, key))
                    raise TransportError(redact(last, key), attempt)
            log.warning("chat request attempt %d/%d failed: %s", attempt, attempts, redact(last, key))
            if attempt < attempts and cfg.backoff > 0:
                self._sleep(cfg.backoff * 2 ** (attempt - 1))
        raise TransportError(f"giving up after {attempts} attempts: {redact(last, key)}", attempts)

    def call(self, req: OperatorRequest) -> RawOutput:
        prompt = self.prompt_for(req)
        return RawOutput(self.complete(prompt.text), req.phase, req.level, prompt)

    def repair_reply(self, prompt: RepairPrompt) -> RawOutput:
        return RawOutput(self.complete(prompt.rendered_text), prompt.phase, prompt.level, prompt)

    def describe(self) -> dict:
        return {"backend": self.name, "model": self.model, "endpoint": self.config.base_url}
