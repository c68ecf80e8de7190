"""Quantum workload orchestration: circuit IR, simulators, a job service and benchmarks."""

from .circuit import Circuit, GateOp, circuit_from_ops, gate, parse_circuit_text, serialize_circuit, validate
from .client import AsyncHandle, BatchExecutionError, Client
from .execution import BackendSelector, ExecutionRequest, ExecutionResult
from .orchestrator import JobStatus, Orchestrator
from .server import serve

__version__ = "0.1.0"

__all__ = [
    "AsyncHandle", "BackendSelector", "BatchExecutionError", "Circuit", "Client", "ExecutionRequest",
    "ExecutionResult", "GateOp", "JobStatus", "Orchestrator", "circuit_from_ops", "gate",
    "parse_circuit_text", "serialize_circuit", "serve", "validate",
]
