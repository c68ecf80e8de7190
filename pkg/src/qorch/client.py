"""Thin client for the orchestrator's HTTP/JSON protocol.

>>> client = Client("http://127.0.0.1:8087")            # doctest: +SKIP
>>> client.execute(build_ghz(3), shots=100).counts       # doctest: +SKIP
{'000': 52, '111': 48}

Completion is detected with server-side long polls (``wait=true``); if a
long poll fails at the transport level the client falls back to polling
status at ``poll_interval_ms``.
"""

from __future__ import annotations

import json
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Sequence

from .circuit import Circuit, as_circuit
from .errors import (Cancelled, JobFailed, JobNotFound, NotReady, QorchError, ServiceClosed,
                     TransportError, UnknownBackendError, ValidationError, WaitTimeout)
from .execution import BackendSelector, ExecutionRequest, ExecutionResult

ENDPOINT_ENV = "QORCH_ENDPOINT"
DEFAULT_ENDPOINT = "http://127.0.0.1:8087"

_ERRORS: dict[str, type[QorchError]] = {
    "not_found": JobNotFound,
    "not_ready": NotReady,
    "timeout": WaitTimeout,
    "cancelled": Cancelled,
    "unknown_backend": UnknownBackendError,
    "shutting_down": ServiceClosed,
}


class BatchExecutionError(QorchError):
    """Some members of :meth:`Client.execute_many` failed.

    ``results`` holds a result or the exception for every input index.
    """

    code = "batch_failed"

    def __init__(self, results: list[ExecutionResult | Exception]) -> None:
        self.results = results
        self.errors = {i: r for i, r in enumerate(results) if isinstance(r, Exception)}
        super().__init__(f"{len(self.errors)} of {len(results)} jobs failed: "
                         + "; ".join(f"[{i}] {e}" for i, e in sorted(self.errors.items())))


@dataclass
class ClientConfig:
    endpoint: str = DEFAULT_ENDPOINT
    default_selector: BackendSelector = field(default_factory=BackendSelector)
    default_shots: int = 1024
    poll_interval_ms: int = 50
    long_poll_ms: int = 10_000
    http_timeout_s: float = 60.0
    retries: int = 2


class AsyncHandle:
    """Completion token for one submitted job; :meth:`result` is idempotent."""

    def __init__(self, client: Client, job_id: str) -> None:
        self.client = client
        self.job_id = job_id
        self._lock = threading.Lock()
        self._outcome: ExecutionResult | Exception | None = None

    def done(self) -> bool:
        if self._outcome is not None:
            return True
        return self.client.status(self.job_id)["status"] in ("done", "failed", "cancelled")

    def result(self, timeout_ms: float | None = None) -> ExecutionResult:
        with self._lock:
            if self._outcome is None:
                try:
                    self._outcome = self.client.wait(self.job_id, timeout_ms)
                except (JobFailed, Cancelled) as exc:
                    self._outcome = exc
            # WaitTimeout and transport errors are not cached: the job may still finish
        if isinstance(self._outcome, Exception):
            raise self._outcome
        return self._outcome

    def cancel(self) -> None:
        self.client.cancel(self.job_id)

    def __repr__(self) -> str:
        return f"AsyncHandle({self.job_id!r})"


class Client:
    """Submit circuits to an orchestrator and collect unified results.

    Args:
        endpoint: orchestrator base URL; ``$QORCH_ENDPOINT`` is used when omitted.
        default_selector: backend used when a call passes none.
        default_shots: shots used when a call passes none.
        poll_interval_ms: status-poll period used when long polling is unavailable.

    Instances are safe to share between threads.
    """

    def __init__(self, endpoint: str | None = None, default_selector: BackendSelector | None = None,
                 default_shots: int = 1024, poll_interval_ms: int = 50, **kw: Any) -> None:
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV) or DEFAULT_ENDPOINT
        self.config = ClientConfig(endpoint.rstrip("/"), default_selector or BackendSelector(),
                                   default_shots, poll_interval_ms, **kw)
        self._pending: set[str] = set()
        self._inflight_lock = threading.Lock()

    @property
    def endpoint(self) -> str:
        return self.config.endpoint

    # -- transport ----------------------------------------------------------------

    def _request(self, method: str, path: str, body: Any = None, timeout: float | None = None,
                 retry: bool = True) -> tuple[int, dict]:
        data = None if body is None else json.dumps(body).encode()
        attempts = 1 + (self.config.retries if retry else 0)
        last: Exception | None = None
        for attempt in range(attempts):
            req = urllib.request.Request(self.endpoint + path, data=data, method=method,
                                         headers={"Content-Type": "application/json"})
            try:
                with urllib.request.urlopen(req, timeout=timeout or self.config.http_timeout_s) as r:
                    return r.status, json.loads(r.read() or b"{}")
            except urllib.error.HTTPError as exc:
                try:
                    payload = json.loads(exc.read() or b"{}")
                except ValueError:
                    payload = {}
                return exc.code, payload
            except (urllib.error.URLError, OSError) as exc:
                last = exc
                if attempt + 1 < attempts:
                    time.sleep(0.05 * 2 ** attempt)
        raise TransportError(f"{method} {self.endpoint}{path} failed: {last}")

    @staticmethod
    def _raise(status: int, body: dict) -> None:
        err = body.get("error", {}) if isinstance(body, dict) else {}
        code, msg = err.get("code", "internal"), err.get("message", f"HTTP {status}")
        if code in _ERRORS:
            raise _ERRORS[code](msg)
        if code == "job_failed":
            raise JobFailed(msg, err.get("backend"))
        if status == 400:
            details = {int(k): v for k, v in err.get("details", {}).items()}
            raise ValidationError(msg, details)
        exc = QorchError(msg)
        exc.code = code
        raise exc

    # -- protocol -----------------------------------------------------------------

    def _wire(self, circuit: Circuit | str, shots: int | None, selector: BackendSelector | None,
              seed: int, deadline_ms: float | None) -> dict[str, Any]:
        req = ExecutionRequest(as_circuit(circuit), self.config.default_shots if shots is None else shots,
                               selector or self.config.default_selector, seed, deadline_ms)
        return req.to_wire()

    def submit(self, circuit: Circuit | str, shots: int | None = None,
               selector: BackendSelector | None = None, seed: int = 0,
               deadline_ms: float | None = None) -> str:
        status, body = self._request("POST", "/v1/jobs", self._wire(circuit, shots, selector, seed, deadline_ms),
                                     retry=False)
        if status != 201:
            self._raise(status, body)
        self._submitted([body["job_id"]])
        return body["job_id"]

    def submit_batch(self, circuits: Sequence[Circuit | str], shots: int | None = None,
                     selector: BackendSelector | None = None, seeds: Sequence[int] | int = 0) -> list[str]:
        if isinstance(seeds, int):
            seeds = [seeds] * len(circuits)
        jobs = [self._wire(c, shots, selector, s, None) for c, s in zip(circuits, seeds)]
        status, body = self._request("POST", "/v1/jobs/batch", {"jobs": jobs}, retry=False)
        if status != 201:
            self._raise(status, body)
        self._submitted(body["job_ids"])
        return body["job_ids"]

    def status(self, job_id: str) -> dict[str, Any]:
        status, body = self._request("GET", f"/v1/jobs/{job_id}")
        if status != 200:
            self._raise(status, body)
        return body

    def cancel(self, job_id: str) -> dict[str, Any]:
        status, body = self._request("DELETE", f"/v1/jobs/{job_id}")
        if status != 200:
            self._raise(status, body)
        return body

    def fetch(self, job_id: str, wait: bool = False, timeout_ms: float | None = None) -> ExecutionResult:
        q = f"?wait={'true' if wait else 'false'}"
        if timeout_ms is not None:
            q += f"&timeout_ms={timeout_ms:g}"
        http_timeout = None if timeout_ms is None else timeout_ms / 1e3 + 10
        status, body = self._request("GET", f"/v1/jobs/{job_id}/result{q}", timeout=http_timeout)
        if status != 200:
            self._raise(status, body)
        return ExecutionResult.from_dict(body)

    def wait(self, job_id: str, timeout_ms: float | None = None) -> ExecutionResult:
        """Block until the job is terminal; long-poll first, interval polling as fallback."""
        try:
            res = self._wait(job_id, timeout_ms)
        except (JobFailed, Cancelled, JobNotFound):
            self._settle(job_id)
            raise
        self._settle(job_id)
        return res

    def _wait(self, job_id: str, timeout_ms: float | None) -> ExecutionResult:
        end = None if timeout_ms is None else time.monotonic() + timeout_ms / 1e3
        while True:
            left = None if end is None else (end - time.monotonic()) * 1e3
            if left is not None and left <= 0:
                raise WaitTimeout(f"job {job_id} not finished within {timeout_ms:g} ms")
            chunk = self.config.long_poll_ms if left is None else min(left, self.config.long_poll_ms)
            try:
                return self.fetch(job_id, wait=True, timeout_ms=max(chunk, 1.0))
            except WaitTimeout:
                continue
            except TransportError:
                return self._poll(job_id, end)

    def _poll(self, job_id: str, end: float | None) -> ExecutionResult:
        while True:
            try:
                return self.fetch(job_id, wait=False)
            except NotReady:
                pass
            if end is not None and time.monotonic() >= end:
                raise WaitTimeout(f"job {job_id} not finished in time")
            time.sleep(self.config.poll_interval_ms / 1e3)

    def _submitted(self, job_ids: Sequence[str]) -> None:
        with self._inflight_lock:
            self._pending.update(job_ids)

    def _settle(self, job_id: str) -> None:
        with self._inflight_lock:
            self._pending.discard(job_id)

    @property
    def jobs_in_flight(self) -> int:
        """Jobs this client submitted whose results have not been collected yet."""
        with self._inflight_lock:
            return len(self._pending)

    # -- public execution API -----------------------------------------------------

    def execute(self, circuit: Circuit | str, shots: int | None = None,
                selector: BackendSelector | None = None, seed: int = 0,
                timeout_ms: float | None = None, deadline_ms: float | None = None) -> ExecutionResult:
        """Submit and wait; same result as ``execute_async(...).result()``."""
        return self.wait(self.submit(circuit, shots, selector, seed, deadline_ms), timeout_ms)

    def execute_async(self, circuit: Circuit | str, shots: int | None = None,
                      selector: BackendSelector | None = None, seed: int = 0,
                      deadline_ms: float | None = None) -> AsyncHandle:
        return AsyncHandle(self, self.submit(circuit, shots, selector, seed, deadline_ms))

    def execute_many(self, circuits: Sequence[Circuit | str], shots: int | None = None,
                     selector: BackendSelector | None = None, seeds: Sequence[int] | int = 0,
                     return_exceptions: bool = False,
                     timeout_ms: float | None = None) -> list[ExecutionResult | Exception]:
        """Run a batch through ``/v1/jobs/batch``; results come back in input order.

        A failed member raises :class:`BatchExecutionError` (carrying every
        other result) unless ``return_exceptions`` is set, in which case the
        exception takes that member's place in the list.
        """
        if not circuits:
            return []
        handles = [AsyncHandle(self, j) for j in self.submit_batch(circuits, shots, selector, seeds)]
        out: list[ExecutionResult | Exception] = []
        for h in handles:
            try:
                out.append(h.result(timeout_ms))
            except (JobFailed, Cancelled, WaitTimeout) as exc:
                out.append(exc)
        if not return_exceptions and any(isinstance(r, Exception) for r in out):
            raise BatchExecutionError(out)
        return out

    def backends(self) -> list[dict[str, Any]]:
        status, body = self._request("GET", "/v1/backends")
        if status != 200:
            self._raise(status, body)
        return body["backends"]

    def workers(self) -> list[dict[str, Any]]:
        status, body = self._request("GET", "/v1/workers")
        if status != 200:
            self._raise(status, body)
        return body["workers"]

    def shutdown(self, drain: bool = True) -> None:
        status, body = self._request("POST", "/v1/shutdown", {"drain": drain}, retry=False)
        if status != 202:
            self._raise(status, body)
