"""Start an eight-worker service in-process and talk to it through the client.

    python demos/service_roundtrip.py
"""

from __future__ import annotations

import time

from qorch.backends import BackendRegistry, MockRemoteBackend, MpsBackend, StateVectorBackend
from qorch.backends.latency import Delay, LatencyProfile
from qorch.backends.remote import EmulatorServer
from qorch.client import Client
from qorch.execution import BackendSelector
from qorch.server import serve
from qorch.workloads import build_ghz

profile = LatencyProfile(queue_delay_ms=Delay.parse("uniform:50,150"))
with EmulatorServer(profile, seed=0) as emu:
    reg = BackendRegistry()
    reg.register(StateVectorBackend())
    reg.register(MpsBackend())
    reg.register(MockRemoteBackend(emu.url, profile))
    with serve(workers=8, registry=reg) as service:
        client = Client(service.url)
        print("backends:", [b["name"] for b in client.backends()])

        # Eight slow jobs land on workers 0..7 in submission order.
        slow = BackendSelector("sv", "", {"delay_ms": "300"})
        t0 = time.perf_counter()
        handles = [client.execute_async(build_ghz(4), shots=50, selector=slow, seed=s) for s in range(8)]
        print("workers:", [h.result().worker_id for h in handles],
              f"in {time.perf_counter() - t0:.2f}s for 8 x 0.3s jobs")

        res = client.execute(build_ghz(3), shots=200, seed=7)
        print("GHZ-3 on sv:", res.counts, f"worker {res.worker_id}")

        # Remote latency reorders completion but not the returned list.
        batch = client.execute_many([build_ghz(n) for n in range(2, 8)], shots=20,
                                    selector=BackendSelector("mock-remote"))
        for r in batch:
            print(f"  n={len(next(iter(r.counts)))} queue_ms={r.queue_ms:6.1f} exec_ms={r.exec_ms:6.1f}")
