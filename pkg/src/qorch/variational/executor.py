"""What variational loops need from an execution service.

:class:`qorch.client.Client` satisfies :class:`Executor` directly;
:class:`LocalExecutor` runs circuits in-process through the adapters, for
notebooks and tests that do not want an HTTP hop.
"""

from __future__ import annotations

import threading
from typing import Protocol

from ..backends.base import BackendRegistry, MpsBackend, StateVectorBackend, adapter_execute
from ..circuit import Circuit
from ..execution import BackendSelector, ExecutionResult


class Executor(Protocol):
    def execute(self, circuit: Circuit, shots: int | None = None,
                selector: BackendSelector | None = None, seed: int = 0) -> ExecutionResult: ...

    @property
    def jobs_in_flight(self) -> int: ...


class LocalExecutor:
    """Synchronous in-process executor over ``sv`` and ``mps`` (or a given registry)."""

    def __init__(self, registry: BackendRegistry | None = None,
                 default_selector: BackendSelector | None = None, default_shots: int = 1024) -> None:
        if registry is None:
            registry = BackendRegistry()
            registry.register(StateVectorBackend())
            registry.register(MpsBackend())
        self.registry = registry
        self.default_selector = default_selector or BackendSelector()
        self.default_shots = default_shots
        self._lock = threading.Lock()
        self._inflight = 0

    def execute(self, circuit: Circuit, shots: int | None = None,
                selector: BackendSelector | None = None, seed: int = 0) -> ExecutionResult:
        with self._lock:
            self._inflight += 1
        try:
            return adapter_execute(circuit, shots or self.default_shots, selector or self.default_selector,
                                   seed, self.registry)
        finally:
            with self._lock:
                self._inflight -= 1

    @property
    def jobs_in_flight(self) -> int:
        with self._lock:
            return self._inflight
