"""Mock cloud backend: a loopback HTTP emulator plus the adapter that calls it.

The emulator delegates to the state-vector engine, so counts for a given
``(circuit, shots, seed)`` are identical to the ``sv`` backend. Before it
answers, it sleeps for a sampled queue delay plus a sampled network delay;
when that total exceeds the deadline it sleeps until the deadline and answers
``504`` with error code ``remote_timeout``.

Run standalone with ``python -m qorch.backends.remote --port 0``; the first
line printed on stdout is the base URL.
"""

from __future__ import annotations

import argparse
import atexit
import http.client
import json
import os
import socket
import subprocess
import sys
import threading
import time
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

import numpy as np

from ..circuit import parse_circuit_text, serialize_circuit
from ..errors import BackendError, CircuitError, RemoteTimeout
from ..execution import ExecutionResult
from ..statevector import DEFAULT_MAX_QUBITS, sv_run
from .base import Backend, _nonneg_float
from .latency import Delay, LatencyProfile

RUN_PATH = "/emu/v1/run"
INFO_PATH = "/emu/v1/info"


# -- emulator ------------------------------------------------------------------

class _EmulatorHandler(BaseHTTPRequestHandler):
    server: _EmulatorHTTPServer
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt: str, *args: Any) -> None:  # keep test output quiet
        pass

    def _send(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _error(self, status: int, code: str, message: str) -> None:
        self._send(status, {"error": {"code": code, "message": message}})

    def do_GET(self) -> None:
        if self.path == INFO_PATH:
            self._send(200, {"service": "mock-remote", "profile": self.server.profile.to_dict(),
                             "max_qubits": DEFAULT_MAX_QUBITS})
        else:
            self._error(404, "not_found", f"no route {self.path}")

    def do_POST(self) -> None:
        if self.path != RUN_PATH:
            self._error(404, "not_found", f"no route {self.path}")
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
            circuit = parse_circuit_text(body["circuit"])
            shots = int(body.get("shots", 1024))
            seed = int(body.get("seed", 0))
            deadline = body.get("deadline_ms", self.server.profile.deadline_ms)
        except (KeyError, TypeError, ValueError, CircuitError) as exc:
            self._error(400, "bad_request", str(exc))
            return
        delay = self.server.sample_delay()
        if deadline is not None and delay > float(deadline):
            time.sleep(float(deadline) / 1e3)
            self._error(504, "remote_timeout",
                        f"simulated cloud queue delay {delay:.1f} ms exceeded deadline {float(deadline):g} ms")
            return
        time.sleep(delay / 1e3)
        t0 = time.perf_counter()
        try:
            res = sv_run(circuit, shots, seed)
        except Exception as exc:
            self._error(500, "backend_error", f"{type(exc).__name__}: {exc}")
            return
        self._send(200, {"counts": res.counts, "exec_ms": (time.perf_counter() - t0) * 1e3,
                         "queue_ms": delay})


class _EmulatorHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], profile: LatencyProfile, seed: int) -> None:
        super().__init__(addr, _EmulatorHandler)
        self.profile = profile
        self._rng = np.random.default_rng(seed)
        self._rng_lock = threading.Lock()

    def sample_delay(self) -> float:
        with self._rng_lock:
            return (self.profile.queue_delay_ms.sample(self._rng)
                    + self.profile.network_delay_ms.sample(self._rng))


class EmulatorServer:
    """Emulator running on a background thread of the current process."""

    def __init__(self, profile: LatencyProfile | None = None, port: int = 0, host: str = "127.0.0.1",
                 seed: int = 0) -> None:
        self.profile = profile or LatencyProfile()
        self._httpd = _EmulatorHTTPServer((host, port), self.profile, seed)
        self._thread = threading.Thread(target=self._httpd.serve_forever, name="mock-remote",
                                        daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join()

    def __enter__(self) -> EmulatorServer:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


class EmulatorProcess:
    """Emulator in a child Python process; ``url`` is known once it is listening."""

    def __init__(self, profile: LatencyProfile | None = None, port: int = 0, seed: int = 0) -> None:
        self.profile = profile or LatencyProfile()
        cmd = [sys.executable, "-m", "qorch.backends.remote", "--port", str(port), "--seed", str(seed),
               "--queue-delay", str(self.profile.queue_delay_ms),
               "--network-delay", str(self.profile.network_delay_ms)]
        if self.profile.deadline_ms is not None:
            cmd += ["--deadline-ms", str(self.profile.deadline_ms)]
        env = dict(os.environ)
        src = str(Path(__file__).resolve().parents[2])
        env["PYTHONPATH"] = os.pathsep.join(filter(None, [src, env.get("PYTHONPATH")]))
        self._proc = subprocess.Popen(cmd, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
                                      env=env, text=True)
        line = self._proc.stdout.readline().strip()
        if not line.startswith("http://"):
            self._proc.kill()
            raise RuntimeError(f"mock-remote emulator failed to start (got {line!r})")
        self.url = line
        atexit.register(self.close)

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdout is not None:
            self._proc.stdout.close()


# -- adapter -------------------------------------------------------------------

_TRANSPORT_ERRORS = (urllib.error.URLError, http.client.HTTPException, ConnectionError,
                     socket.timeout, TimeoutError)


class MockRemoteBackend(Backend):
    """Adapter for the emulator, reached over HTTP.

    Without ``url`` the adapter spawns its own emulator process on first use.
    A transport failure is retried once; a ``remote_timeout`` is not retried.
    """

    name = "mock-remote"
    subbackends = ("simulator",)
    max_qubits = DEFAULT_MAX_QUBITS
    locality = "remote"
    properties = frozenset({"delay_ms", "deadline_ms"})

    def __init__(self, url: str | None = None, profile: LatencyProfile | None = None,
                 http_timeout_s: float = 600.0) -> None:
        self._url = url.rstrip("/") if url else None
        self.profile = profile or LatencyProfile()
        self.http_timeout_s = http_timeout_s
        self._proc: EmulatorProcess | None = None
        self._lock = threading.Lock()
        self.notes = f"loopback HTTP emulator over sv; latency queue={self.profile.queue_delay_ms} " \
                     f"network={self.profile.network_delay_ms}"

    @property
    def url(self) -> str:
        with self._lock:
            if self._url is None:
                self._proc = EmulatorProcess(self.profile)
                self._url = self._proc.url
            return self._url

    def configure(self, subbackend, properties):
        config = super().configure(subbackend, properties)
        if "deadline_ms" in properties:
            config["remote_deadline_ms"] = _nonneg_float(properties["deadline_ms"], "deadline_ms")
        return config

    def _run(self, circuit, shots, seed, config, should_stop, deadline_ms):
        payload: dict[str, Any] = {"circuit": serialize_circuit(circuit), "shots": shots, "seed": seed}
        remote_deadline = config.get("remote_deadline_ms")
        if remote_deadline is not None:
            payload["deadline_ms"] = remote_deadline
        body = self._post(payload)
        if should_stop is not None:
            should_stop()
        return ExecutionResult({str(k): int(v) for k, v in body["counts"].items()}, shots, self.name,
                               -1, float(body.get("queue_ms", 0.0)), float(body["exec_ms"]), seed)

    def _post(self, payload: dict) -> dict:
        data = json.dumps(payload).encode()
        last: Exception | None = None
        for attempt in range(2):
            req = urllib.request.Request(self.url + RUN_PATH, data=data, method="POST",
                                         headers={"Content-Type": "application/json"})
            try:
                with urllib.request.urlopen(req, timeout=self.http_timeout_s) as resp:
                    return json.loads(resp.read())
            except urllib.error.HTTPError as exc:
                err = _error_body(exc)
                if err.get("code") == "remote_timeout":
                    raise RemoteTimeout(self.name, err.get("message", "remote timeout")) from None
                raise BackendError(self.name, f"HTTP {exc.code}: {err.get('message', exc.reason)}") from None
            except _TRANSPORT_ERRORS as exc:
                last = exc
        raise BackendError(self.name, f"transport error after retry: {last}")

    def close(self) -> None:
        with self._lock:
            if self._proc is not None:
                self._proc.close()
                self._proc = None
                self._url = None


def _error_body(exc: urllib.error.HTTPError) -> dict:
    try:
        return json.loads(exc.read()).get("error", {})
    except (ValueError, AttributeError):
        return {}


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(prog="python -m qorch.backends.remote",
                                 description="Loopback emulator of a cloud simulator backend.")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=0)
    ap.add_argument("--queue-delay", default="0", help="fixed:MS, uniform:A,B or lognormal:MU,SIGMA")
    ap.add_argument("--network-delay", default="0")
    ap.add_argument("--deadline-ms", type=float, default=None)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    profile = LatencyProfile(Delay.parse(args.queue_delay), Delay.parse(args.network_delay),
                             args.deadline_ms)
    httpd = _EmulatorHTTPServer((args.host, args.port), profile, args.seed)
    host, port = httpd.server_address[:2]
    print(f"http://{host}:{port}", flush=True)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()


if __name__ == "__main__":
    main()
