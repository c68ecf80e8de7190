"""Backend adapter contract, registry and the in-process engines.

Every adapter follows the same four steps for one task: accept a circuit,
resolve runtime parameters from the selector, run the engine, and marshal
the outcome into an :class:`~qorch.execution.ExecutionResult`.
"""

from __future__ import annotations

import re
import threading
import time
from dataclasses import asdict, dataclass
from typing import Any, Callable, Mapping

from .. import mps as mps_engine
from .. import statevector as sv_engine
from ..circuit import Circuit, validate
from ..errors import (BackendError, Cancelled, CapacityError, CircuitError, DeadlineExceeded,
                      SelectorError, UnknownBackendError)
from ..execution import BackendSelector, ExecutionResult

StopHook = Callable[[], None]


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    subbackends: tuple[str, ...]
    max_qubits: int
    locality: str  # "local" | "remote"
    notes: str = ""

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["subbackends"] = list(self.subbackends)
        return d


class Backend:
    """Base adapter. Subclasses set the class attributes and implement ``_run``."""

    name = ""
    subbackends: tuple[str, ...] = ()
    max_qubits = 0
    locality = "local"
    notes = ""
    properties: frozenset[str] = frozenset({"delay_ms"})

    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(self.name, tuple(self.subbackends), self.max_qubits, self.locality,
                                 self.notes)

    def configure(self, subbackend: str, properties: Mapping[str, str]) -> dict[str, Any]:
        """Validate selector fields and turn them into keyword arguments for ``_run``."""
        unknown = sorted(set(properties) - self.properties)
        if unknown:
            raise SelectorError(f"backend {self.name!r} does not accept properties {unknown}")
        config = self._configure_subbackend(subbackend or self.subbackends[0])
        if "delay_ms" in properties:
            config["delay_ms"] = _nonneg_float(properties["delay_ms"], "delay_ms")
        return config

    def _configure_subbackend(self, sub: str) -> dict[str, Any]:
        if sub not in self.subbackends:
            raise SelectorError(f"backend {self.name!r} has no subbackend {sub!r}")
        return {}

    def capacity(self, config: Mapping[str, Any]) -> int:
        return self.max_qubits

    def execute(self, circuit: Circuit, shots: int, seed: int, config: Mapping[str, Any],
                should_stop: StopHook | None = None, deadline_ms: float | None = None) -> ExecutionResult:
        limit = self.capacity(config)
        if circuit.num_qubits > limit:
            raise CapacityError(f"{circuit.num_qubits} qubits exceeds {self.name} capacity of {limit}")
        stop = _with_deadline(should_stop, deadline_ms)
        config = dict(config)
        delay = config.pop("delay_ms", 0.0)
        t0 = time.perf_counter()
        if delay:
            _interruptible_sleep(delay / 1e3, stop)
        res = self._run(circuit, shots, seed, config, stop, deadline_ms)
        exec_ms = (time.perf_counter() - t0) * 1e3 - res.queue_ms
        return ExecutionResult(res.counts, shots, self.name, -1, res.queue_ms, max(exec_ms, 0.0), seed)

    def _run(self, circuit: Circuit, shots: int, seed: int, config: dict[str, Any],
             should_stop: StopHook | None, deadline_ms: float | None) -> ExecutionResult:
        raise NotImplementedError

    def close(self) -> None:
        pass


def _nonneg_float(v: str, key: str) -> float:
    try:
        x = float(v)
    except ValueError:
        raise SelectorError(f"property {key} must be a number, got {v!r}") from None
    if not x >= 0:
        raise SelectorError(f"property {key} must be >= 0")
    return x


def _with_deadline(should_stop: StopHook | None, deadline_ms: float | None) -> StopHook | None:
    if deadline_ms is None:
        return should_stop
    limit = time.monotonic() + deadline_ms / 1e3

    def stop() -> None:
        if should_stop is not None:
            should_stop()
        if time.monotonic() > limit:
            raise DeadlineExceeded(f"deadline of {deadline_ms:g} ms exceeded")

    return stop


def _interruptible_sleep(seconds: float, stop: StopHook | None) -> None:
    end = time.monotonic() + seconds
    while True:
        if stop is not None:
            stop()
        left = end - time.monotonic()
        if left <= 0:
            return
        time.sleep(min(left, 0.005))


class StateVectorBackend(Backend):
    name = "sv"
    subbackends = ("statevector",)
    max_qubits = sv_engine.DEFAULT_MAX_QUBITS
    notes = "dense state vector, in-place strided gate kernels"

    def __init__(self, max_qubits: int = sv_engine.DEFAULT_MAX_QUBITS) -> None:
        self.max_qubits = max_qubits

    def _run(self, circuit, shots, seed, config, should_stop, deadline_ms):
        return sv_engine.sv_run(circuit, shots, seed, self.max_qubits, should_stop)


_MPS_SUB = re.compile(r"^mps-chi(\d+)$")


class MpsBackend(Backend):
    name = "mps"
    subbackends = ("mps-chi64", "mps-chi16", "mps-chi32", "mps-chi128", "mps-chi256", "mps-exact")
    max_qubits = 128
    notes = "matrix product state, SVD truncation; any mps-chiN subbackend is accepted"
    properties = frozenset({"delay_ms", "chi_max", "trunc_threshold"})

    def _configure_subbackend(self, sub: str) -> dict[str, Any]:
        if sub == "mps-exact":
            return {"chi_max": 1 << 30, "trunc_threshold": 0.0}
        m = _MPS_SUB.match(sub)
        if m is None or int(m.group(1)) < 1:
            raise SelectorError(f"backend 'mps' has no subbackend {sub!r}")
        return {"chi_max": int(m.group(1)), "trunc_threshold": mps_engine.DEFAULT_THRESHOLD}

    def configure(self, subbackend, properties):
        config = super().configure(subbackend, properties)
        if "chi_max" in properties:
            try:
                chi = int(properties["chi_max"])
            except ValueError:
                raise SelectorError("property chi_max must be an integer") from None
            if chi < 1:
                raise SelectorError("property chi_max must be >= 1")
            config["chi_max"] = chi
        if "trunc_threshold" in properties:
            config["trunc_threshold"] = _nonneg_float(properties["trunc_threshold"], "trunc_threshold")
        return config

    def _run(self, circuit, shots, seed, config, should_stop, deadline_ms):
        return mps_engine.mps_run(circuit, shots, seed, config["chi_max"], config["trunc_threshold"],
                                  should_stop)


class BackendRegistry:
    """Name -> adapter map. Registration is expected at startup; lookups are lock-free reads."""

    def __init__(self) -> None:
        self._backends: dict[str, Backend] = {}
        self._lock = threading.Lock()

    def register(self, backend: Backend) -> None:
        with self._lock:
            if backend.name in self._backends:
                raise ValueError(f"backend {backend.name!r} is already registered")
            self._backends = {**self._backends, backend.name: backend}

    def get(self, name: str) -> Backend:
        try:
            return self._backends[name]
        except KeyError:
            raise UnknownBackendError(f"unknown backend {name!r}") from None

    def list(self) -> list[BackendDescriptor]:
        return [b.descriptor() for b in self._backends.values()]

    def names(self) -> list[str]:
        return list(self._backends)

    def resolve(self, selector: BackendSelector) -> tuple[Backend, dict[str, Any]]:
        backend = self.get(selector.backend)
        return backend, backend.configure(selector.subbackend, selector.properties)

    def close(self) -> None:
        for b in self._backends.values():
            b.close()


def default_registry(remote_url: str | None = None, profile=None) -> BackendRegistry:
    """Registry with ``sv``, ``mps`` and ``mock-remote``.

    Without ``remote_url`` the mock-remote adapter starts its own emulator
    process on first use.
    """
    from .remote import MockRemoteBackend

    reg = BackendRegistry()
    reg.register(StateVectorBackend())
    reg.register(MpsBackend())
    reg.register(MockRemoteBackend(remote_url, profile))
    return reg


def adapter_execute(circuit: Circuit, shots: int, selector: BackendSelector, seed: int,
                    registry: BackendRegistry, should_stop: StopHook | None = None,
                    deadline_ms: float | None = None) -> ExecutionResult:
    """Run one task synchronously through the adapter named by ``selector``."""
    problems = validate(circuit)
    if problems:
        raise CircuitError("; ".join(problems))
    if shots < 1:
        raise ValueError("shots must be >= 1")
    backend, config = registry.resolve(selector)
    try:
        return backend.execute(circuit, shots, seed, config, should_stop, deadline_ms)
    except (BackendError, CapacityError, Cancelled, DeadlineExceeded):
        raise
    except Exception as exc:
        raise BackendError(backend.name, f"{type(exc).__name__}: {exc}") from exc
