"""Execution backends behind a single adapter contract."""

from .base import (Backend, BackendDescriptor, BackendRegistry, MpsBackend, StateVectorBackend,
                   adapter_execute, default_registry)
from .latency import Delay, LatencyProfile
from .remote import EmulatorProcess, EmulatorServer, MockRemoteBackend

__all__ = [
    "Backend", "BackendDescriptor", "BackendRegistry", "Delay", "EmulatorProcess", "EmulatorServer",
    "LatencyProfile", "MockRemoteBackend", "MpsBackend", "StateVectorBackend", "adapter_execute",
    "default_registry",
]
