"""Replay stub for chat-completion contract tests.

Rules map a request matcher to a canned reply. The same rule set drives an
``httpx.MockTransport`` (used by the tests) or a small local HTTP server
for manual runs::

    python -m graphevo.backends.stub rules.json --port 8765
"""

from __future__ import annotations

import argparse
import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional

import httpx


def completion_body(content: str, model: str = "stub") -> dict:
    return {
        "id": "stub",
        "object": "chat.completion",
        "model": model,
        "choices": [{"index": 0, "finish_reason": "stop", "message": {"role": "assistant", "content": content}}],
    }


@dataclass
class Rule:
    """``contains`` strings must all appear in the last message content."""

    contains: tuple[str, ...] = ()
    path: Optional[str] = None
    content: Optional[str] = None
    status: int = 200
    body: Optional[dict] = None
    error: Optional[str] = None          # "timeout" or "connect"
    times: Optional[int] = None          # None = unlimited
    delay: float = 0.0                   # seconds before answering
    responder: Optional[Callable[[dict], str]] = field(default=None, repr=False)
    hits: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "Rule":
        match = d.get("match", {})
        resp = d.get("response", {})
        return cls(
            contains=tuple(match.get("contains", ())),
            path=match.get("path"),
            content=resp.get("content"),
            status=resp.get("status", 200),
            body=resp.get("json"),
            error=resp.get("error"),
            times=d.get("times"),
            delay=resp.get("delay", 0.0),
        )

    def matches(self, path: str, body: dict) -> bool:
        if self.times is not None and self.hits >= self.times:
            return False
        if self.path is not None and not path.endswith(self.path):
            return False
        messages = body.get("messages") or [{}]
        text = str(messages[-1].get("content", ""))
        return all(c in text for c in self.contains)


class ReplayStub:
    """First matching rule wins; every request is recorded for assertions."""

    def __init__(self, rules=()):
        self.rules = [r if isinstance(r, Rule) else Rule.from_dict(r) for r in rules]
        self.requests: list[dict] = []
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path) -> "ReplayStub":
        return cls(json.loads(Path(path).read_text())["rules"])

    def add(self, **kw) -> Rule:
        rule = Rule(**kw)
        self.rules.append(rule)
        return rule

    def dispatch(self, path: str, headers: dict, body: dict):
        """Returns (status, json_body) or raises the configured transport error."""
        with self._lock:
            self.requests.append({"path": path, "headers": dict(headers), "body": body})
            rule = next((r for r in self.rules if r.matches(path, body)), None)
            if rule is None:
                return 404, {"error": {"message": "no stub rule matched"}}
            rule.hits += 1
        if rule.delay > 0:
            time.sleep(rule.delay)
        if rule.error == "timeout":
            raise httpx.ReadTimeout("stub timeout")
        if rule.error == "connect":
            raise httpx.ConnectError("stub connection refused")
        if rule.body is not None:
            return rule.status, rule.body
        content = rule.responder(body) if rule.responder else (rule.content or "")
        if rule.status != 200:
            return rule.status, {"error": {"message": content or "stub error"}}
        return 200, completion_body(content, body.get("model", "stub"))

    def handler(self, request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content or b"{}")
        try:
            status, payload = self.dispatch(request.url.path, request.headers, body)
        except httpx.TimeoutException as exc:
            raise type(exc)(str(exc), request=request) from None
        except httpx.TransportError as exc:
            raise type(exc)(str(exc), request=request) from None
        return httpx.Response(status, json=payload)

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handler)

    def client(self) -> httpx.Client:
        return httpx.Client(transport=self.transport())

    def serve(self, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                try:
                    status, payload = stub.dispatch(self.path, dict(self.headers), body)
                except httpx.TimeoutException:
                    return  # drop the connection without answering
                except httpx.TransportError:
                    self.close_connection = True
                    return
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        return ThreadingHTTPServer((host, port), Handler)


def main(argv=None):
    ap = argparse.ArgumentParser(description="serve a replay stub for chat-completion requests")
    ap.add_argument("rules", help="JSON file with a top-level 'rules' list")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8765)
    args = ap.parse_args(argv)
    server = ReplayStub.load(args.rules).serve(args.host, args.port)
    print(f"stub listening on http://{args.host}:{server.server_address[1]}")
    server.serve_forever()


if __name__ == "__main__":
    main()
