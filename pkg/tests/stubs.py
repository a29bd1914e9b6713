"""Deterministic stub endpoints used by the tests.

The HTTP stubs implement the same wire shapes as production endpoints
(POST /v1/generate and POST /v1/embed) on a loopback port, so transport
code paths are exercised for real. Their behavior is a pure function of
the request body.
"""

from __future__ import annotations

import hashlib
import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from seasonal_ads.errors import EndpointError

UNPARSEABLE_MARK = "zzqx-unparseable"
LOQUACIOUS_MARK = "zzqx-loquacious"
SEASONAL_MARK = "zzqx-seasonal"


def scripted_answer(prompt: str) -> str:
    """The stub's fixed decision rule over prompt text."""
    if UNPARSEABLE_MARK in prompt:
        return "The ad is ambiguous."
    if LOQUACIOUS_MARK in prompt:
        return "No, this ad merely mentions February."
    if SEASONAL_MARK in prompt:
        return "The ad references the event explicitly.\nANSWER: yes"
    return "Nothing ties this ad to the event.\nANSWER: no"


class ScriptedClient:
    """In-memory inference client answering via scripted_answer."""

    def __init__(self):
        self.calls = 0

    def generate(self, request) -> str:
        self.calls += 1
        return scripted_answer(request.prompt_text)


class SequenceClient:
    """Replays a fixed list of responses; entries may be exceptions."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = 0

    def generate(self, request) -> str:
        item = self.responses[min(self.calls, len(self.responses) - 1)]
        self.calls += 1
        if isinstance(item, Exception):
            raise item
        return item


class FlakyClient:
    """Fails with EndpointError a fixed number of times, then delegates."""

    def __init__(self, inner, failures: int):
        self.inner = inner
        self.remaining = failures
        self.calls = 0

    def generate(self, request) -> str:
        self.calls += 1
        if self.remaining > 0:
            self.remaining -= 1
            raise EndpointError("stub transport failure")
        return self.inner.generate(request)


def hash_vector(content: str, dim: int, model_id: str) -> np.ndarray:
    """Unit-norm vector derived from a content hash; stable across runs."""
    digest = hashlib.sha256(f"{model_id}|{content}".encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    vec = np.random.default_rng(seed).standard_normal(dim)
    return vec / np.linalg.norm(vec)


class DeterministicEmbedder:
    """In-memory embedding provider with hash-derived vectors."""

    def __init__(self, dim: int = 8, model_id: str = "stub-hash"):
        self.dim = dim
        self.model_id = model_id
        self.calls = 0

    def embed(self, items, modality):
        self.calls += 1
        out = []
        for item in items:
            content = item.get("text") if modality == "text" else item.get("image_ref")
            out.append((item["id"], hash_vector(f"{modality}:{content}", self.dim, self.model_id).tolist()))
        return out


class _StubHandler(BaseHTTPRequestHandler):
    embedder: DeterministicEmbedder = None
    fail_first: list = None  # mutable [n] so handlers can decrement

    def log_message(self, *args):
        pass

    def _reply(self, status: int, payload: dict):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length))
        except json.JSONDecodeError:
            self._reply(400, {"error": "invalid JSON"})
            return
        if self.fail_first and self.fail_first[0] > 0:
            self.fail_first[0] -= 1
            self._reply(503, {"error": "synthetic outage"})
            return
        if self.path == "/v1/generate":
            if "prompt" not in body:
                self._reply(400, {"error": "missing prompt"})
                return
            self._reply(200, {"text": scripted_answer(body["prompt"])})
        elif self.path == "/v1/embed":
            vectors = [
                {"id": ad_id, "values": values}
                for ad_id, values in self.embedder.embed(body.get("items", []), body.get("modality"))
            ]
            self._reply(200, {"vectors": vectors})
        else:
            self._reply(404, {"error": "unknown endpoint"})


@contextmanager
def http_stub(embed_dim: int = 8, fail_first: int = 0):
    """Serve the stub endpoints on a loopback port; yields the base URL."""
    handler = type(
        "Handler",
        (_StubHandler,),
        {"embedder": DeterministicEmbedder(embed_dim), "fail_first": [fail_first]},
    )
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        thread.join(timeout=5)
