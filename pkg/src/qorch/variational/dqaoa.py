"""Distributed QAOA: decompose into clamped sub-QUBOs, solve them concurrently, merge.

Each iteration draws ``nsubq`` random variable subsets of size ``subqsize``
(overlap allowed), clamps every sub-QUBO to the incumbent, solves them with
:func:`qaoa_solve` on up to ``concurrency`` threads, and then merges the
candidates greedily in ascending cost order, accepting a candidate only when
it lowers the full objective. The incumbent cost is therefore non-increasing.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from ..execution import BackendSelector
from .executor import Executor, LocalExecutor
from .qaoa import QaoaParams, SolutionRecord, qaoa_solve
from .qubo import MAX_BRUTE_FORCE, QuboProblem, as_bits, bits_to_str, brute_force, extract_subqubo, fidelity, qubo_cost

SubsetPolicy = Callable[[np.random.Generator, int, int, int], list[list[int]]]

_EPS = 1e-12


def random_subsets(rng: np.random.Generator, n: int, subqsize: int, nsubq: int) -> list[list[int]]:
    """Uniform random subsets; different subsets may share variables."""
    return [sorted(int(i) for i in rng.choice(n, subqsize, replace=False)) for _ in range(nsubq)]


@dataclass(frozen=True)
class DqaoaConfig:
    subqsize: int
    nsubq: int
    max_iters: int = 10
    no_improve_patience: int = 3
    concurrency: int = 4
    seed: int = 0
    timeline_period_ms: float = 5.0

    def validate(self, n: int) -> None:
        if not 1 <= self.subqsize <= n:
            raise ValueError(f"subqsize must be in [1, {n}], got {self.subqsize}")
        if self.nsubq < 1:
            raise ValueError("nsubq must be >= 1")
        if self.max_iters < 1 or self.no_improve_patience < 1 or self.concurrency < 1:
            raise ValueError("max_iters, no_improve_patience and concurrency must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {"subqsize": self.subqsize, "nsubq": self.nsubq, "max_iters": self.max_iters,
                "no_improve_patience": self.no_improve_patience, "concurrency": self.concurrency,
                "seed": self.seed}


class _Sampler:
    """Background thread recording ``jobs_in_flight`` at a fixed period."""

    def __init__(self, executor: Executor, t0: float, period_ms: float, out: list[dict[str, Any]]) -> None:
        self.executor, self.t0, self.period, self.out = executor, t0, period_ms / 1e3, out
        self.iteration = 0
        self.cost = 0.0
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, name="dqaoa-sampler", daemon=True)

    def _loop(self) -> None:
        while not self._stop.is_set():
            self.sample()
            self._stop.wait(self.period)

    def sample(self) -> int:
        k = self.executor.jobs_in_flight
        self.out.append({"iteration": self.iteration, "wall_ms": (time.perf_counter() - self.t0) * 1e3,
                         "jobs_in_flight": k, "cost": self.cost})
        return k

    def __enter__(self) -> _Sampler:
        self._thread.start()
        return self

    def __exit__(self, *exc: object) -> None:
        self._stop.set()
        self._thread.join()


def dqaoa_solve(q: QuboProblem, cfg: DqaoaConfig, qparams: QaoaParams | None = None,
                executor: Executor | None = None, selector: BackendSelector | None = None,
                subsets: SubsetPolicy = random_subsets,
                initial_x: Sequence[int] | None = None) -> SolutionRecord:
    """Run the decompose / solve / merge loop until ``max_iters`` or patience runs out.

    Sub-solve ``j`` of iteration ``it`` uses seed ``cfg.seed + it * nsubq + j``.
    A failing sub-solve is logged and skipped. ``iteration_log`` holds one row
    per iteration; ``timeline`` holds the periodic in-flight samples.
    """
    cfg.validate(q.size)
    qparams = qparams or QaoaParams()
    executor = executor or LocalExecutor()
    rng = np.random.default_rng(cfg.seed)
    x = np.zeros(q.size, dtype=np.int64) if initial_x is None else as_bits(initial_x).copy()
    cost = qubo_cost(q, x)
    log: list[dict[str, Any]] = []
    timeline: list[dict[str, Any]] = []
    evals = 0
    stale = 0
    t0 = time.perf_counter()

    with _Sampler(executor, t0, cfg.timeline_period_ms, timeline) as sampler, \
            ThreadPoolExecutor(max_workers=cfg.concurrency, thread_name_prefix="dqaoa") as pool:
        sampler.cost = cost
        for it in range(cfg.max_iters):
            sampler.iteration = it
            t_it = time.perf_counter()
            chosen = subsets(rng, q.size, cfg.subqsize, cfg.nsubq)
            frozen = x.copy()
            futures = [pool.submit(qaoa_solve, extract_subqubo(q, frozen, s),
                                   qparams.with_seed(cfg.seed + it * cfg.nsubq + j), executor, selector,
                                   None, False)
                       for j, s in enumerate(chosen)]
            peak = 0
            while not all(f.done() for f in futures):
                peak = max(peak, sampler.sample())
                time.sleep(cfg.timeline_period_ms / 1e3)
            candidates, errors = [], []
            for j, (s, f) in enumerate(zip(chosen, futures)):
                try:
                    sol = f.result()
                except Exception as exc:  # one bad sub-solve never stops the iteration
                    errors.append({"subproblem": j, "error": str(exc)})
                    evals += len(getattr(exc, "log", []))
                    continue
                evals += sol.evals
                peak = max(peak, max((r["jobs_in_flight"] for r in sol.iteration_log), default=0))
                merged = frozen.copy()
                merged[s] = sol.x
                candidates.append((qubo_cost(q, merged), j, s, sol.x))
            accepted = []
            for _, j, s, y in sorted(candidates, key=lambda c: (c[0], c[1])):
                trial = x.copy()
                trial[s] = y
                c = qubo_cost(q, trial)
                if c < cost - _EPS:
                    x, cost = trial, c
                    accepted.append(j)
            sampler.cost = cost
            stale = 0 if accepted else stale + 1
            log.append({"iteration": it, "cost": cost, "wall_ms": (time.perf_counter() - t0) * 1e3,
                        "iter_ms": (time.perf_counter() - t_it) * 1e3, "jobs_in_flight": peak,
                        "accepted": accepted, "subsets": chosen, "errors": errors})
            if stale >= cfg.no_improve_patience:
                break

    ref = None
    fid = None
    if q.size <= MAX_BRUTE_FORCE:
        _, b, w = brute_force(q)
        ref = {"best_cost": b, "worst_cost": w}
        fid = fidelity(cost, b, w)
    return SolutionRecord(bits_to_str(x), cost, fid, evals, log, timeline, (), (), ref)
