"""HTTP/JSON front of the orchestrator.

Routes::

    POST   /v1/jobs                      -> 201 {job_id}
    POST   /v1/jobs/batch                -> 201 {job_ids}
    GET    /v1/jobs/{id}                 -> status snapshot
    GET    /v1/jobs/{id}/result?wait=true&timeout_ms=N
    DELETE /v1/jobs/{id}                 -> 200 (cancel)
    GET    /v1/backends
    GET    /v1/workers
    POST   /v1/shutdown {drain}          -> 202

Errors are ``{"error": {"code": ..., "message": ...}}``.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qs, urlsplit

from .errors import (Cancelled, CircuitError, JobFailed, JobNotFound, NotReady, QorchError,
                     SelectorError, ServiceClosed, UnknownBackendError, ValidationError, WaitTimeout)
from .execution import ExecutionRequest
from .orchestrator import Orchestrator

# Server-side cap on one long-poll; clients re-issue the wait after a 408.
MAX_WAIT_MS = 30_000.0

_STATUS = {
    ValidationError: 400,
    CircuitError: 400,
    SelectorError: 400,
    UnknownBackendError: 400,
    JobNotFound: 404,
    WaitTimeout: 408,
    NotReady: 409,
    Cancelled: 410,
    JobFailed: 500,
    ServiceClosed: 503,
}


def _http_status(exc: Exception) -> int:
    for cls, code in _STATUS.items():
        if isinstance(exc, cls):
            return code
    return 500


class _Handler(BaseHTTPRequestHandler):
    server: _OrchestratorHTTPServer
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt: str, *args: Any) -> None:
        pass

    # -- plumbing ---------------------------------------------------------------

    def _send(self, status: int, body: dict[str, Any]) -> None:
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _fail(self, exc: Exception) -> None:
        err: dict[str, Any] = {"code": getattr(exc, "code", "internal"), "message": str(exc)}
        if isinstance(exc, JobFailed) and exc.backend:
            err["backend"] = exc.backend
        if isinstance(exc, ValidationError) and exc.details:
            err["details"] = {str(k): v for k, v in exc.details.items()}
        self._send(_http_status(exc), {"error": err})

    def _body(self) -> Any:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            return json.loads(raw)
        except ValueError as exc:
            raise ValidationError(f"request body is not JSON: {exc}") from None

    def _route(self, method: str) -> None:
        url = urlsplit(self.path)
        parts = [p for p in url.path.split("/") if p]
        query = {k: v[-1] for k, v in parse_qs(url.query).items()}
        orch = self.server.orch
        try:
            if parts[:1] != ["v1"]:
                raise JobNotFound(f"no route {url.path}")
            rest = parts[1:]
            if method == "POST" and rest == ["jobs"]:
                req = _decode_job(self._body())
                self._send(201, {"job_id": orch.submit(req)})
            elif method == "POST" and rest == ["jobs", "batch"]:
                self._send(201, {"job_ids": orch.submit_batch(_decode_batch(self._body()))})
            elif method == "GET" and len(rest) == 2 and rest[0] == "jobs":
                self._send(200, orch.status(rest[1]))
            elif method == "GET" and len(rest) == 3 and rest[0] == "jobs" and rest[2] == "result":
                wait = query.get("wait", "false").lower() in ("1", "true", "yes")
                timeout = min(float(query.get("timeout_ms", MAX_WAIT_MS)), MAX_WAIT_MS)
                res = orch.result(rest[1], wait=wait, timeout_ms=timeout)
                self._send(200, res.to_dict())
            elif method == "DELETE" and len(rest) == 2 and rest[0] == "jobs":
                self._send(200, orch.cancel(rest[1]))
            elif method == "GET" and rest == ["backends"]:
                self._send(200, {"backends": orch.backends()})
            elif method == "GET" and rest == ["workers"]:
                self._send(200, {"workers": orch.workers()})
            elif method == "POST" and rest == ["shutdown"]:
                drain = bool(self._body().get("drain", True))
                self._send(202, {"status": "shutting_down", "drain": drain})
                self.server.begin_shutdown(drain)
            else:
                raise JobNotFound(f"no route {method} {url.path}")
        except QorchError as exc:
            self._fail(exc)
        except (ValueError, TypeError) as exc:
            self._fail(ValidationError(str(exc)))

    def do_GET(self) -> None:
        self._route("GET")

    def do_POST(self) -> None:
        self._route("POST")

    def do_DELETE(self) -> None:
        self._route("DELETE")


def _decode_job(d: Any) -> ExecutionRequest:
    return ExecutionRequest.from_wire(d)


def _decode_batch(body: Any) -> list[ExecutionRequest]:
    jobs = body.get("jobs") if isinstance(body, dict) else None
    if not isinstance(jobs, list):
        raise ValidationError("batch body must be {\"jobs\": [...]}")
    out, details = [], {}
    for i, d in enumerate(jobs):
        try:
            out.append(ExecutionRequest.from_wire(d))
        except (QorchError, ValueError) as exc:
            details[i] = [str(exc)]
    if details:
        summary = "; ".join(f"[{i}] {m[0]}" for i, m in sorted(details.items()))
        raise ValidationError(f"batch rejected: {summary}", details)
    return out


class _OrchestratorHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], orch: Orchestrator, on_shutdown=None) -> None:
        super().__init__(addr, _Handler)
        self.orch = orch
        self._on_shutdown = on_shutdown
        self.stopped = threading.Event()

    def begin_shutdown(self, drain: bool) -> None:
        def run() -> None:
            self.orch.shutdown(drain=drain)
            if self._on_shutdown is not None:
                self._on_shutdown()
            self.shutdown()
            self.stopped.set()

        threading.Thread(target=run, name="qorch-shutdown", daemon=True).start()


class ServiceHandle:
    """A running orchestrator bound to an HTTP port.

    Use :meth:`serve_forever` to block in the foreground (CLI), or
    :meth:`start` for a background thread (tests, ``--inproc`` benchmarks).
    """

    def __init__(self, orch: Orchestrator, port: int = 0, host: str = "127.0.0.1",
                 on_shutdown=None) -> None:
        self.orch = orch
        self._httpd = _OrchestratorHTTPServer((host, port), orch, on_shutdown)
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def start(self) -> ServiceHandle:
        self._thread = threading.Thread(target=self._httpd.serve_forever, name="qorch-http",
                                        daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        try:
            self._httpd.serve_forever()
        finally:
            self._httpd.server_close()

    def wait_stopped(self, timeout: float | None = None) -> bool:
        return self._httpd.stopped.wait(timeout)

    def close(self, drain: bool = False) -> None:
        """Shut down the orchestrator and release the port."""
        if not self._httpd.stopped.is_set():
            self.orch.shutdown(drain=drain)
            if self._httpd._on_shutdown is not None:
                self._httpd._on_shutdown()
            if self._thread is not None:
                self._httpd.shutdown()
            self._httpd.stopped.set()
        if self._thread is not None:
            self._thread.join()
        self._httpd.server_close()

    def __enter__(self) -> ServiceHandle:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def serve(workers: int = 8, port: int = 0, registry=None, host: str = "127.0.0.1",
          journal=None, on_shutdown=None) -> ServiceHandle:
    """Start an orchestrator with ``workers`` threads behind HTTP; returns once listening."""
    orch = Orchestrator(registry, workers, journal)
    try:
        return ServiceHandle(orch, port, host, on_shutdown).start()
    except OSError:
        orch.shutdown(drain=False)
        raise
