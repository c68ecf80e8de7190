"""Job queue and worker pool.

One global FIFO feeds ``W`` long-lived worker threads. Whenever a job is
queued or a worker frees up, queued jobs go to idle workers scanned
round-robin from a rotating pointer, so an idle pool receiving ``k`` jobs
assigns job ``i`` to worker ``i mod W``; once the pool is busy, jobs simply
take the next free worker in FIFO order.

Cancellation is cooperative: a running job sees it at the next gate
boundary through the ``should_stop`` hook handed to the backend.
"""

from __future__ import annotations

import enum
import itertools
import json
import secrets
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence, TextIO

from .backends.base import BackendRegistry, adapter_execute, default_registry
from .errors import (Cancelled, CapacityError, DeadlineExceeded, JobFailed, JobNotFound, NotReady,
                     QorchError, ServiceClosed, ValidationError, WaitTimeout)
from .execution import ExecutionRequest, ExecutionResult

DEFAULT_WORKERS = 8


class JobStatus(str, enum.Enum):
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"
    CANCELLED = "cancelled"

    @property
    def terminal(self) -> bool:
        return self in (JobStatus.DONE, JobStatus.FAILED, JobStatus.CANCELLED)


TRANSITIONS: dict[JobStatus, frozenset[JobStatus]] = {
    JobStatus.QUEUED: frozenset({JobStatus.RUNNING, JobStatus.CANCELLED}),
    JobStatus.RUNNING: frozenset({JobStatus.DONE, JobStatus.FAILED, JobStatus.CANCELLED}),
    JobStatus.DONE: frozenset(),
    JobStatus.FAILED: frozenset(),
    JobStatus.CANCELLED: frozenset(),
}


class IllegalTransition(RuntimeError):
    pass


@dataclass
class JobRecord:
    job_id: str
    request: ExecutionRequest
    status: JobStatus = JobStatus.QUEUED
    worker_id: int | None = None
    submitted_at: float = 0.0
    started_at: float | None = None
    finished_at: float | None = None
    result: ExecutionResult | None = None
    error: str | None = None
    error_code: str | None = None
    error_backend: str | None = None
    cancel_requested: bool = False
    history: list[JobStatus] = field(default_factory=lambda: [JobStatus.QUEUED])

    def snapshot(self) -> dict[str, Any]:
        d: dict[str, Any] = {"job_id": self.job_id, "status": self.status.value,
                             "submitted_at": self.submitted_at}
        if self.worker_id is not None:
            d["worker_id"] = self.worker_id
        if self.started_at is not None:
            d["started_at"] = self.started_at
        if self.finished_at is not None:
            d["finished_at"] = self.finished_at
        if self.error is not None:
            d["error"] = {"code": self.error_code, "message": self.error, "backend": self.error_backend}
        return d


class Orchestrator:
    """In-process service: submit, status, result, cancel, shutdown.

    Args:
        registry: backends to dispatch to; :func:`default_registry` if omitted.
        workers: size of the worker pool (>= 1).
        journal: optional path of an append-only JSONL file of state transitions.
    """

    def __init__(self, registry: BackendRegistry | None = None, workers: int = DEFAULT_WORKERS,
                 journal: str | Path | None = None) -> None:
        if not isinstance(workers, int) or workers < 1:
            raise ValueError(f"workers must be a positive integer, got {workers!r}")
        self._owns_registry = registry is None
        self.registry = registry if registry is not None else default_registry()
        self.num_workers = workers
        self._t0 = time.monotonic()
        self._session = secrets.token_hex(4)
        self._counter = itertools.count(1)
        self._cond = threading.Condition()
        self._jobs: dict[str, JobRecord] = {}
        self._queue: deque[str] = deque()
        self._slots: list[str | None] = [None] * workers
        self._wake = [threading.Event() for _ in range(workers)]
        self._rr = 0
        self._accepting = True
        self._stopping = False
        self._journal: TextIO | None = open(journal, "a", encoding="utf-8") if journal else None
        self._threads = [threading.Thread(target=self._worker_loop, args=(i,), name=f"qorch-worker-{i}",
                                          daemon=True) for i in range(workers)]
        for t in self._threads:
            t.start()

    # -- clock / bookkeeping ---------------------------------------------------

    def now_ms(self) -> float:
        """Milliseconds since service start (monotonic)."""
        return (time.monotonic() - self._t0) * 1e3

    def _new_id(self) -> str:
        return f"job-{next(self._counter):08d}-{self._session}"

    def _transition(self, rec: JobRecord, new: JobStatus) -> None:
        if new not in TRANSITIONS[rec.status]:
            raise IllegalTransition(f"{rec.job_id}: {rec.status.value} -> {new.value}")
        rec.status = new
        rec.history.append(new)
        if self._journal is not None:
            entry = {"t": round(self.now_ms(), 3), "job_id": rec.job_id, "status": new.value,
                     "worker_id": rec.worker_id}
            if rec.error is not None:
                entry["error"] = rec.error
            self._journal.write(json.dumps(entry) + "\n")
            self._journal.flush()
        if new.terminal:
            self._cond.notify_all()

    # -- submission ------------------------------------------------------------

    def _check(self, req: ExecutionRequest) -> list[str]:
        problems = req.problems()
        try:
            backend, config = self.registry.resolve(req.selector)
        except QorchError as exc:
            return problems + [str(exc)]
        limit = backend.capacity(config)
        if req.circuit.num_qubits > limit:
            problems.append(f"{req.circuit.num_qubits} qubits exceeds {backend.name} capacity of {limit}")
        return problems

    def submit(self, req: ExecutionRequest) -> str:
        """Queue one job and return its id without waiting for it.

        Raises:
            UnknownBackendError, SelectorError: the selector does not resolve.
            ValidationError: the request or circuit is invalid, or too large.
        """
        self.registry.resolve(req.selector)
        problems = self._check(req)
        if problems:
            raise ValidationError("; ".join(problems), {0: problems})
        return self._enqueue([req])[0]

    def submit_batch(self, reqs: Sequence[ExecutionRequest]) -> list[str]:
        """All-or-nothing: any invalid member rejects the batch with per-index details."""
        details = {i: p for i, r in enumerate(reqs) if (p := self._check(r))}
        if details:
            summary = "; ".join(f"[{i}] {'; '.join(p)}" for i, p in sorted(details.items()))
            raise ValidationError(f"batch rejected: {summary}", details)
        return self._enqueue(reqs)

    def _enqueue(self, reqs: Iterable[ExecutionRequest]) -> list[str]:
        with self._cond:
            if not self._accepting:
                raise ServiceClosed("service is shutting down")
            ids = []
            now = self.now_ms()
            for req in reqs:
                rec = JobRecord(self._new_id(), req, submitted_at=now)
                self._jobs[rec.job_id] = rec
                self._queue.append(rec.job_id)
                ids.append(rec.job_id)
                if self._journal is not None:
                    self._journal.write(json.dumps({"t": round(now, 3), "job_id": rec.job_id,
                                                    "status": "queued"}) + "\n")
            self._dispatch()
            return ids

    def _dispatch(self) -> None:
        """Hand queued jobs to idle workers. Caller holds the lock."""
        while self._queue and not self._stopping:
            w = next((k for k in ((self._rr + j) % self.num_workers for j in range(self.num_workers))
                      if self._slots[k] is None), None)
            if w is None:
                return
            job_id = self._queue.popleft()
            rec = self._jobs[job_id]
            if rec.status is not JobStatus.QUEUED:  # cancelled while waiting
                continue
            rec.worker_id = w
            rec.started_at = self.now_ms()
            self._transition(rec, JobStatus.RUNNING)
            self._slots[w] = job_id
            self._rr = (w + 1) % self.num_workers
            self._wake[w].set()

    # -- workers ---------------------------------------------------------------

    def _worker_loop(self, w: int) -> None:
        while True:
            self._wake[w].wait()
            self._wake[w].clear()
            with self._cond:
                job_id = self._slots[w]
                if job_id is None:
                    if self._stopping:
                        return
                    continue
                rec = self._jobs[job_id]
            self._run(w, rec)
            with self._cond:
                self._slots[w] = None
                self._dispatch()
                self._cond.notify_all()
                if self._stopping and self._slots[w] is None:
                    return

    def _run(self, w: int, rec: JobRecord) -> None:
        req = rec.request

        def should_stop() -> None:
            if rec.cancel_requested:
                raise Cancelled(f"job {rec.job_id} cancelled")

        outcome: tuple[JobStatus, Any]
        try:
            should_stop()
            res = adapter_execute(req.circuit, req.shots, req.selector, req.seed, self.registry,
                                  should_stop, req.deadline_ms)
            outcome = (JobStatus.DONE, res)
        except Cancelled:
            outcome = (JobStatus.CANCELLED, None)
        except Exception as exc:  # isolation: nothing escapes a worker
            outcome = (JobStatus.FAILED, exc)
        with self._cond:
            rec.finished_at = max(self.now_ms(), rec.started_at or 0.0)
            status, payload = outcome
            if status is JobStatus.DONE:
                waited = rec.started_at - rec.submitted_at
                rec.result = ExecutionResult(payload.counts, payload.shots, payload.backend, w,
                                             waited + payload.queue_ms, payload.exec_ms, payload.seed)
            elif status is JobStatus.FAILED:
                rec.error = str(payload) or type(payload).__name__
                rec.error_code = getattr(payload, "code", "internal")
                if isinstance(payload, (DeadlineExceeded, CapacityError)) or not hasattr(payload, "backend"):
                    rec.error_backend = req.selector.backend
                else:
                    rec.error_backend = payload.backend
                if req.selector.backend not in rec.error:
                    rec.error = f"[{rec.error_backend}] {rec.error}"
            self._transition(rec, status)

    # -- queries ---------------------------------------------------------------

    def _get(self, job_id: str) -> JobRecord:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise JobNotFound(f"unknown job id {job_id!r}") from None

    def status(self, job_id: str) -> dict[str, Any]:
        with self._cond:
            return self._get(job_id).snapshot()

    def record(self, job_id: str) -> JobRecord:
        return self._get(job_id)

    def result(self, job_id: str, wait: bool = True, timeout_ms: float | None = None) -> ExecutionResult:
        """Result of a job.

        Raises:
            JobFailed: the job failed; ``.backend`` names the engine.
            Cancelled: the job was cancelled.
            NotReady: ``wait`` is false and the job is not terminal.
            WaitTimeout: ``wait`` is true and ``timeout_ms`` elapsed first.
        """
        deadline = None if timeout_ms is None else time.monotonic() + timeout_ms / 1e3
        with self._cond:
            rec = self._get(job_id)
            while not rec.status.terminal:
                if not wait:
                    raise NotReady(f"job {job_id} is {rec.status.value}")
                left = None if deadline is None else deadline - time.monotonic()
                if left is not None and left <= 0:
                    raise WaitTimeout(f"job {job_id} still {rec.status.value} after {timeout_ms:g} ms")
                self._cond.wait(left)
            if rec.status is JobStatus.DONE:
                return rec.result
            if rec.status is JobStatus.FAILED:
                raise JobFailed(rec.error, rec.error_backend)
            raise Cancelled(f"job {job_id} was cancelled")

    def cancel(self, job_id: str) -> dict[str, Any]:
        """Idempotent. Queued jobs never run; running ones stop at the next gate."""
        with self._cond:
            rec = self._get(job_id)
            if rec.status is JobStatus.QUEUED:
                rec.finished_at = self.now_ms()
                self._transition(rec, JobStatus.CANCELLED)
            elif rec.status is JobStatus.RUNNING:
                rec.cancel_requested = True
            return rec.snapshot()

    def workers(self) -> list[dict[str, Any]]:
        with self._cond:
            out = []
            for i, job in enumerate(self._slots):
                d: dict[str, Any] = {"id": i, "busy": job is not None}
                if job is not None:
                    d["current_job"] = job
                out.append(d)
            return out

    def backends(self) -> list[dict[str, Any]]:
        return [d.to_dict() for d in self.registry.list()]

    def counts_by_status(self) -> dict[str, int]:
        with self._cond:
            out = {s.value: 0 for s in JobStatus}
            for rec in self._jobs.values():
                out[rec.status.value] += 1
            return out

    def running_count(self) -> int:
        with self._cond:
            return sum(s is not None for s in self._slots)

    def jobs(self) -> list[JobRecord]:
        with self._cond:
            return list(self._jobs.values())

    # -- teardown ----------------------------------------------------------------

    @property
    def accepting(self) -> bool:
        return self._accepting

    def shutdown(self, drain: bool = True, timeout: float | None = None) -> None:
        """Stop accepting work, then drain or cancel, then join the workers.

        With ``drain`` every queued and running job finishes first. Without it
        queued jobs are cancelled and running jobs are asked to stop.
        """
        with self._cond:
            if self._stopping:
                return
            self._accepting = False
            if drain:
                self._cond.wait_for(lambda: not self._queue and all(s is None for s in self._slots),
                                    timeout)
            for job_id in list(self._queue):
                rec = self._jobs[job_id]
                if rec.status is JobStatus.QUEUED:
                    rec.finished_at = self.now_ms()
                    self._transition(rec, JobStatus.CANCELLED)
            self._queue.clear()
            for job_id in self._slots:
                if job_id is not None:
                    self._jobs[job_id].cancel_requested = True
            self._stopping = True
        for ev in self._wake:
            ev.set()
        for t in self._threads:
            t.join(timeout)
        if self._journal is not None:
            self._journal.close()
            self._journal = None
        if self._owns_registry:
            self.registry.close()

    def __enter__(self) -> Orchestrator:
        return self

    def __exit__(self, *exc: object) -> None:
        self.shutdown(drain=False)
