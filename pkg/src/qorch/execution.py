"""Job envelope types shared by backends, the orchestrator and the client."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from .circuit import Circuit, as_circuit, serialize_circuit, validate
from .errors import ValidationError

RESULT_FIELDS = ("counts", "shots", "backend", "worker_id", "queue_ms", "exec_ms", "seed")


@dataclass(frozen=True)
class BackendSelector:
    """Which engine runs a job: ``{"backend": "mps", "subbackend": "mps-chi64"}``.

    An empty ``subbackend`` picks the backend's default variant.
    """

    backend: str = "sv"
    subbackend: str = ""
    properties: Mapping[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"backend": self.backend, "subbackend": self.subbackend,
                "properties": {str(k): str(v) for k, v in self.properties.items()}}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> BackendSelector:
        props = d.get("properties") or {}
        if not isinstance(props, Mapping):
            raise ValidationError("properties must be an object")
        return cls(str(d.get("backend", "sv")), str(d.get("subbackend") or ""),
                   {str(k): str(v) for k, v in props.items()})

    def __hash__(self) -> int:
        return hash((self.backend, self.subbackend, tuple(sorted(self.properties.items()))))


@dataclass(frozen=True)
class ExecutionResult:
    """Unified result format returned by every backend."""

    counts: dict[str, int]
    shots: int
    backend: str
    worker_id: int = -1
    queue_ms: float = 0.0
    exec_ms: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "counts": dict(self.counts),
            "shots": self.shots,
            "backend": self.backend,
            "worker_id": self.worker_id,
            "queue_ms": self.queue_ms,
            "exec_ms": self.exec_ms,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ExecutionResult:
        return cls(
            counts={str(k): int(v) for k, v in d["counts"].items()},
            shots=int(d["shots"]),
            backend=str(d["backend"]),
            worker_id=int(d["worker_id"]),
            queue_ms=float(d["queue_ms"]),
            exec_ms=float(d["exec_ms"]),
            seed=int(d["seed"]),
        )

    def probabilities(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()}


@dataclass(frozen=True)
class ExecutionRequest:
    circuit: Circuit
    shots: int = 1024
    selector: BackendSelector = field(default_factory=BackendSelector)
    seed: int = 0
    deadline_ms: float | None = None

    def problems(self) -> list[str]:
        out = list(validate(self.circuit))
        if not isinstance(self.shots, int) or isinstance(self.shots, bool) or self.shots < 1:
            out.append(f"shots must be a positive integer, got {self.shots!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            out.append(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.deadline_ms is not None and not self.deadline_ms > 0:
            out.append("deadline_ms must be positive")
        return out

    def to_wire(self) -> dict[str, Any]:
        d = {"circuit": serialize_circuit(self.circuit), "shots": self.shots, "seed": self.seed,
             **self.selector.to_dict()}
        if self.deadline_ms is not None:
            d["deadline_ms"] = self.deadline_ms
        return d

    @classmethod
    def from_wire(cls, d: Mapping[str, Any]) -> ExecutionRequest:
        """Decode a wire job; raises ``CircuitError`` or ``ValidationError``."""
        if not isinstance(d, Mapping):
            raise ValidationError("job must be a JSON object")
        if "circuit" not in d:
            raise ValidationError("missing field 'circuit'")
        text = d["circuit"]
        if not isinstance(text, str):
            raise ValidationError("circuit must be QASM-subset text")
        deadline = d.get("deadline_ms")
        return cls(
            circuit=as_circuit(text),
            shots=_int_field(d, "shots", 1024),
            selector=BackendSelector.from_dict(d),
            seed=_int_field(d, "seed", 0),
            deadline_ms=None if deadline is None else float(deadline),
        )


def _int_field(d: Mapping[str, Any], key: str, default: int) -> int:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{key} must be an integer")
    return v
