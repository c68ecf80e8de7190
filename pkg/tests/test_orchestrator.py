from __future__ import annotations

import json
import random
import threading
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qorch.backends import Backend
from qorch.circuit import Circuit, GateOp
from qorch.errors import (Cancelled, JobFailed, JobNotFound, NotReady, SelectorError, ServiceClosed,
                          UnknownBackendError, ValidationError, WaitTimeout)
from qorch.execution import BackendSelector, ExecutionRequest
from qorch.orchestrator import TRANSITIONS, IllegalTransition, JobStatus, Orchestrator
from qorch.workloads import build_ghz

from conftest import make_registry

TINY = Circuit(1, (GateOp("H", (0,)),), (0,))


def slow(ms: float, backend: str = "sv") -> ExecutionRequest:
    return ExecutionRequest(build_ghz(3), 16, BackendSelector(backend, "", {"delay_ms": str(ms)}), 0)


def quick(seed: int = 0) -> ExecutionRequest:
    return ExecutionRequest(build_ghz(3), 16, BackendSelector("sv"), seed)


class Flaky(Backend):
    name = "flaky"
    subbackends = ("default",)
    max_qubits = 8

    def _run(self, circuit, shots, seed, config, should_stop, deadline_ms):
        raise RuntimeError("hardware on fire")


@pytest.fixture
def orch():
    o = Orchestrator(make_registry(), workers=8)
    yield o
    o.shutdown(drain=False)


def legal_history(history: list[JobStatus]) -> bool:
    if not history or history[0] is not JobStatus.QUEUED or not history[-1].terminal:
        return False
    return all(b in TRANSITIONS[a] for a, b in zip(history, history[1:]))


class TestConstruction:
    @pytest.mark.parametrize("workers", [0, -1, 2.5])
    def test_bad_worker_count(self, workers):
        with pytest.raises(ValueError):
            Orchestrator(make_registry(), workers=workers)

    def test_worker_identities(self, orch):
        assert [w["id"] for w in orch.workers()] == list(range(8))
        assert not any(w["busy"] for w in orch.workers())


class TestRoundRobin:
    def test_eight_simultaneous_jobs(self):
        with Orchestrator(make_registry(), workers=8) as o:
            ids = o.submit_batch([slow(200) for _ in range(8)])
            for i in ids:
                o.result(i, timeout_ms=10_000)
            assert [o.record(i).worker_id for i in ids] == list(range(8))
            assert [o.result(i).worker_id for i in ids] == list(range(8))

    def test_sixteen_jobs_first_eight_in_order(self):
        with Orchestrator(make_registry(), workers=8) as o:
            ids = [o.submit(slow(100)) for _ in range(16)]
            for i in ids:
                o.result(i, timeout_ms=10_000)
            assert [o.record(i).worker_id for i in ids[:8]] == list(range(8))
            assert sorted(o.record(i).worker_id for i in ids[8:]) == list(range(8))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 10))
    def test_idle_pool_assignment_property(self, w, k):
        with Orchestrator(make_registry(), workers=w) as o:
            ids = o.submit_batch([slow(40) for _ in range(k)])
            for i in ids:
                o.result(i, timeout_ms=10_000)
            assigned = [o.record(i).worker_id for i in ids]
            assert assigned[:w] == [i % w for i in range(min(k, w))]

    def test_single_worker_is_serial(self):
        with Orchestrator(make_registry(), workers=1) as o:
            ids = [o.submit(quick(s)) for s in range(10)]
            recs = [o.record(i) for i in ids]
            for i in ids:
                o.result(i, timeout_ms=10_000)
            starts = [r.started_at for r in recs]
            assert starts == sorted(starts)
            for a, b in zip(recs, recs[1:]):
                assert a.finished_at <= b.started_at


class TestSubmit:
    def test_valid_job(self, orch):
        job = orch.submit(quick())
        assert orch.status(job)["status"] in {"queued", "running", "done"}
        assert job.startswith("job-00000001-")

    def test_ids_monotone_with_session_token(self, orch):
        ids = [orch.submit(quick()) for _ in range(3)]
        nums = [int(i.split("-")[1]) for i in ids]
        assert nums == sorted(nums) and len({i.split("-")[2] for i in ids}) == 1

    def test_malformed_rejected_without_record(self, orch):
        bad = ExecutionRequest(Circuit(2, (GateOp("RX", (0,)),), (0, 1)), 10)
        with pytest.raises(ValidationError):
            orch.submit(bad)
        assert orch.jobs() == []

    @pytest.mark.parametrize("req", [
        ExecutionRequest(build_ghz(2), 0),
        ExecutionRequest(build_ghz(2), 10, seed=-1),
        ExecutionRequest(build_ghz(2), 10, deadline_ms=0),
        ExecutionRequest(build_ghz(30), 10),
    ])
    def test_request_validation(self, orch, req):
        with pytest.raises(ValidationError):
            orch.submit(req)

    def test_unknown_backend(self, orch):
        with pytest.raises(UnknownBackendError):
            orch.submit(ExecutionRequest(build_ghz(2), 10, BackendSelector("nope")))

    def test_bad_selector(self, orch):
        with pytest.raises(SelectorError):
            orch.submit(ExecutionRequest(build_ghz(2), 10, BackendSelector("sv", "", {"x": "1"})))

    def test_empty_batch(self, orch):
        assert orch.submit_batch([]) == []

    def test_batch_all_or_nothing(self, orch):
        reqs = [quick(), quick(), ExecutionRequest(Circuit(1, (), (4,))), quick()]
        with pytest.raises(ValidationError) as info:
            orch.submit_batch(reqs)
        assert list(info.value.details) == [2]
        assert orch.jobs() == []

    def test_batch_ids_in_order(self, orch):
        ids = orch.submit_batch([quick(s) for s in range(5)])
        assert [orch.record(i).request.seed for i in ids] == list(range(5))

    def test_batch_of_four_runs_concurrently(self, orch):
        ids = orch.submit_batch([slow(300) for _ in range(4)])
        peak = 0
        while not all(orch.record(i).status.terminal for i in ids):
            peak = max(peak, orch.running_count())
            time.sleep(0.005)
        assert peak == 4

    def test_concurrency_floor(self, orch):
        ids = orch.submit_batch([slow(300) for _ in range(12)])
        peak = 0
        while not all(orch.record(i).status.terminal for i in ids):
            peak = max(peak, orch.running_count())
            time.sleep(0.005)
        assert peak == 8


class TestStatusAndResult:
    def test_done_timestamps_ordered(self, orch):
        job = orch.submit(quick())
        orch.result(job, timeout_ms=5000)
        s = orch.status(job)
        assert s["status"] == "done"
        assert s["submitted_at"] <= s["started_at"] <= s["finished_at"]

    def test_unknown_id(self, orch):
        with pytest.raises(JobNotFound):
            orch.status("job-x")
        with pytest.raises(JobNotFound):
            orch.result("job-x")
        with pytest.raises(JobNotFound):
            orch.cancel("job-x")

    def test_result_fields(self, orch):
        job = orch.submit(slow(50))
        r = orch.result(job, timeout_ms=5000)
        assert r.exec_ms >= 50 and r.queue_ms >= 0 and r.worker_id == orch.record(job).worker_id
        assert sum(r.counts.values()) == 16

    def test_timing_sanity(self, orch):
        ids = orch.submit_batch([slow(30) for _ in range(20)])
        for i in ids:
            r = orch.result(i, timeout_ms=10_000)
            rec = orch.record(i)
            assert r.queue_ms + r.exec_ms <= rec.finished_at - rec.submitted_at + 2.0

    def test_failed_job_names_backend(self):
        reg = make_registry()
        reg.register(Flaky())
        with Orchestrator(reg, workers=2) as o:
            job = o.submit(ExecutionRequest(build_ghz(2), 5, BackendSelector("flaky")))
            with pytest.raises(JobFailed) as info:
                o.result(job, timeout_ms=5000)
            assert info.value.backend == "flaky" and "flaky" in str(info.value)
            s = o.status(job)
            assert s["status"] == "failed" and s["error"]["backend"] == "flaky"
            assert o.record(job).result is None

    def test_not_ready_and_timeout(self, orch):
        job = orch.submit(slow(500))
        with pytest.raises(NotReady):
            orch.result(job, wait=False)
        with pytest.raises(WaitTimeout):
            orch.result(job, timeout_ms=1)

    def test_deadline_fails_job(self, orch):
        job = orch.submit(ExecutionRequest(build_ghz(2), 5, BackendSelector("sv", "", {"delay_ms": "400"}),
                                           deadline_ms=50))
        with pytest.raises(JobFailed, match="deadline"):
            orch.result(job, timeout_ms=5000)

    def test_isolation(self):
        reg = make_registry()
        reg.register(Flaky())
        with Orchestrator(reg, workers=4) as o:
            good = [o.submit(quick(s)) for s in range(6)]
            bad = [o.submit(ExecutionRequest(build_ghz(2), 5, BackendSelector("flaky"))) for _ in range(6)]
            for g in good:
                assert sum(o.result(g, timeout_ms=5000).counts.values()) == 16
            for b in bad:
                with pytest.raises(JobFailed):
                    o.result(b, timeout_ms=5000)
            assert all(o.status(g)["status"] == "done" for g in good)


class TestCancel:
    def test_cancel_queued_never_runs(self):
        with Orchestrator(make_registry(), workers=1) as o:
            blocker = o.submit(slow(300))
            victim = o.submit(quick())
            assert o.cancel(victim)["status"] == "cancelled"
            o.result(blocker, timeout_ms=5000)
            rec = o.record(victim)
            assert rec.worker_id is None and rec.started_at is None
            assert rec.history == [JobStatus.QUEUED, JobStatus.CANCELLED]
            with pytest.raises(Cancelled):
                o.result(victim)

    def test_cancel_done_is_noop(self, orch):
        job = orch.submit(quick())
        orch.result(job, timeout_ms=5000)
        assert orch.cancel(job)["status"] == "done"
        assert orch.result(job).shots == 16

    def test_cancel_twice(self, orch):
        job = orch.submit(slow(2000))
        orch.cancel(job)
        orch.cancel(job)
        with pytest.raises(Cancelled):
            orch.result(job, timeout_ms=5000)

    def test_cancel_running_interrupts(self, orch):
        job = orch.submit(slow(5000))
        while orch.status(job)["status"] != "running":
            time.sleep(0.001)
        t0 = time.perf_counter()
        orch.cancel(job)
        with pytest.raises(Cancelled):
            orch.result(job, timeout_ms=5000)
        assert time.perf_counter() - t0 < 1.0
        assert orch.record(job).history == [JobStatus.QUEUED, JobStatus.RUNNING, JobStatus.CANCELLED]


class TestShutdown:
    def test_empty_is_fast(self):
        o = Orchestrator(make_registry(), workers=8)
        t0 = time.perf_counter()
        o.shutdown()
        assert time.perf_counter() - t0 <= 1.0
        assert all(not t.is_alive() for t in o._threads)

    def test_drain_completes_queued(self):
        o = Orchestrator(make_registry(), workers=1)
        ids = [o.submit(slow(50)) for _ in range(4)]
        o.shutdown(drain=True)
        assert [o.status(i)["status"] for i in ids] == ["done"] * 4

    def test_no_drain_cancels_queued(self):
        o = Orchestrator(make_registry(), workers=1)
        ids = [o.submit(slow(300)) for _ in range(4)]
        time.sleep(0.05)
        o.shutdown(drain=False)
        assert [o.status(i)["status"] for i in ids] == ["cancelled"] * 4

    def test_submit_after_shutdown(self):
        o = Orchestrator(make_registry(), workers=1)
        o.shutdown()
        with pytest.raises(ServiceClosed):
            o.submit(quick())
        o.shutdown()

    def test_journal(self, tmp_path):
        path = tmp_path / "jobs.jsonl"
        o = Orchestrator(make_registry(), workers=2, journal=path)
        ids = [o.submit(quick(s)) for s in range(3)]
        o.shutdown(drain=True)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        for i in ids:
            assert [r["status"] for r in rows if r["job_id"] == i] == ["queued", "running", "done"]


class TestStateMachine:
    def test_illegal_transition_raises(self, orch):
        job = orch.submit(quick())
        orch.result(job, timeout_ms=5000)
        with pytest.raises(IllegalTransition):
            orch._transition(orch.record(job), JobStatus.RUNNING)

    def test_result_iff_done(self):
        reg = make_registry()
        reg.register(Flaky())
        with Orchestrator(reg, workers=4) as o:
            ids = [o.submit(quick()) for _ in range(5)]
            ids += [o.submit(ExecutionRequest(build_ghz(2), 5, BackendSelector("flaky"))) for _ in range(5)]
            ids += [o.submit(slow(1000)) for _ in range(5)]
            for i in ids[-5:]:
                o.cancel(i)
            o.shutdown(drain=True)
            for i in ids:
                rec = o.record(i)
                assert (rec.result is not None) == (rec.status is JobStatus.DONE)
                assert (rec.error is not None) == (rec.status is JobStatus.FAILED)


def run_stress(total: int = 10_000, threads: int = 8, workers: int = 8, seed: int = 0) -> dict:
    """Concurrent submit/cancel load; returns the audit numbers."""
    reg = make_registry()
    reg.register(Flaky())
    o = Orchestrator(reg, workers=workers)
    accepted: list[str] = []
    lock = threading.Lock()
    errors: list[BaseException] = []
    per_thread = total // threads

    def client(k: int) -> None:
        rng = random.Random(seed * 1000 + k)
        mine: list[str] = []
        try:
            for j in range(per_thread):
                backend = "flaky" if rng.random() < 0.05 else "sv"
                job = o.submit(ExecutionRequest(TINY, 1, BackendSelector(backend), j))
                mine.append(job)
                if rng.random() < 0.2:
                    o.cancel(rng.choice(mine))
        except BaseException as exc:  # surfaced below
            errors.append(exc)
        with lock:
            accepted.extend(mine)

    ts = [threading.Thread(target=client, args=(k,)) for k in range(threads)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    o.shutdown(drain=True, timeout=120)
    recs = o.jobs()
    terminal = sum(r.status.terminal for r in recs)
    illegal = sum(not legal_history(r.history) for r in recs)
    return {"accepted": len(accepted), "records": len(recs), "terminal": terminal, "illegal": illegal,
            "errors": errors, "by_status": o.counts_by_status(),
            "alive": sum(t.is_alive() for t in o._threads)}


class TestStress:
    def test_ten_thousand_jobs(self):
        out = run_stress()
        assert out["errors"] == []
        assert out["accepted"] == out["records"] == out["terminal"] == 10_000
        assert out["illegal"] == 0 and out["alive"] == 0
        assert out["by_status"]["queued"] == out["by_status"]["running"] == 0
        assert out["by_status"]["cancelled"] > 0 and out["by_status"]["failed"] > 0
