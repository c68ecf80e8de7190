"""Exception hierarchy shared across engines, backends and the service."""

from __future__ import annotations


class QorchError(Exception):
    """Base class for all errors raised by qorch."""

    code = "internal"


class CircuitError(QorchError, ValueError):
    """A circuit is malformed or violates an IR invariant."""

    code = "invalid_circuit"


class CircuitSyntaxError(CircuitError):
    """Parse failure in circuit text, positioned at ``line``/``column`` (1-based)."""

    code = "syntax_error"

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.reason = message
        self.line = line
        self.column = column


class CapacityError(QorchError):
    """Requested qubit count exceeds what an engine or backend can hold."""

    code = "capacity_exceeded"


class UnknownBackendError(QorchError, KeyError):
    code = "unknown_backend"

    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


class SelectorError(QorchError, ValueError):
    """Bad subbackend or property in a backend selector."""

    code = "invalid_selector"


class BackendError(QorchError):
    """Failure inside a backend; always carries the backend name."""

    code = "backend_error"

    def __init__(self, backend: str, message: str) -> None:
        super().__init__(f"[{backend}] {message}")
        self.backend = backend
        self.reason = message


class RemoteTimeout(BackendError):
    """Simulated cloud-queue timeout reported by the remote emulator."""

    code = "remote_timeout"


class TransportError(QorchError):
    """Network-level failure talking to a service."""

    code = "transport_error"


class Cancelled(QorchError):
    code = "cancelled"


class DeadlineExceeded(QorchError):
    code = "deadline_exceeded"


class JobNotFound(QorchError, KeyError):
    code = "not_found"

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class NotReady(QorchError):
    code = "not_ready"


class WaitTimeout(QorchError, TimeoutError):
    code = "timeout"


class JobFailed(QorchError):
    """A job reached the failed state; ``backend`` names the engine that failed."""

    code = "job_failed"

    def __init__(self, message: str, backend: str | None = None) -> None:
        super().__init__(message)
        self.backend = backend


class ServiceClosed(QorchError):
    code = "shutting_down"


class ValidationError(QorchError, ValueError):
    """Request rejected before enqueue. ``details`` maps batch index to messages."""

    code = "validation_failed"

    def __init__(self, message: str, details: dict[int, list[str]] | None = None) -> None:
        super().__init__(message)
        self.details = details or {}
