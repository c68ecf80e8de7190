from __future__ import annotations

import sys

import pytest

from qorch.backends import BackendRegistry, MockRemoteBackend, MpsBackend, StateVectorBackend
from qorch.backends.remote import EmulatorServer
from qorch.client import Client
from qorch.server import serve


def make_registry(remote_url: str | None = None) -> BackendRegistry:
    reg = BackendRegistry()
    reg.register(StateVectorBackend())
    reg.register(MpsBackend())
    if remote_url is not None:
        reg.register(MockRemoteBackend(remote_url))
    return reg


@pytest.fixture(scope="session")
def emulator():
    with EmulatorServer() as emu:
        yield emu


@pytest.fixture
def local_registry() -> BackendRegistry:
    return make_registry()


@pytest.fixture
def full_registry(emulator) -> BackendRegistry:
    return make_registry(emulator.url)


@pytest.fixture(scope="module")
def service():
    """Eight-worker service over sv, mps and an in-thread mock-remote emulator."""
    with EmulatorServer() as emu:
        handle = serve(workers=8, registry=make_registry(emu.url))
        try:
            yield handle
        finally:
            handle.close(drain=False)


@pytest.fixture
def client(service) -> Client:
    return Client(service.url)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n, (ok, detail) in sorted(results.items()):
        terminalreporter.write_line(f"C{n} {'PASS' if ok else 'FAIL'}: {detail}")
