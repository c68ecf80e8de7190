"""QAOA: layered cost/mixer ansatz and a sampled-cost Nelder-Mead loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
import scipy.optimize

from ..circuit import Circuit, GateOp
from ..errors import QorchError
from ..execution import BackendSelector
from .executor import Executor, LocalExecutor
from .qubo import (MAX_BRUTE_FORCE, QuboProblem, as_bits, batch_costs, bits_to_str, brute_force,
                   fidelity, ising_terms, qubo_cost)

_EPS = 1e-12


@dataclass(frozen=True)
class OptimizerSpec:
    method: str = "nelder-mead"
    max_evals: int = 150
    tolerance: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method.lower() != "nelder-mead":
            raise ValueError(f"unsupported optimizer {self.method!r}; only nelder-mead is available")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class QaoaParams:
    """Ansatz depth ``p`` with initial angles; defaults follow a linear ramp.

    ``gammas``/``betas`` left empty are filled with ``0.1 (k+1)`` and ``0.1 (p-k)``.
    """

    p: int = 2
    gammas: tuple[float, ...] = ()
    betas: tuple[float, ...] = ()
    shots: int = 1024
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not self.gammas:
            object.__setattr__(self, "gammas", tuple(0.1 * (k + 1) for k in range(self.p)))
        if not self.betas:
            object.__setattr__(self, "betas", tuple(0.1 * (self.p - k) for k in range(self.p)))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if len(self.gammas) != self.p or len(self.betas) != self.p:
            raise ValueError("gammas and betas must each have exactly p entries")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    def with_seed(self, seed: int) -> QaoaParams:
        return replace(self, optimizer=replace(self.optimizer, seed=seed))

    def to_dict(self) -> dict[str, Any]:
        return {"p": self.p, "gammas": list(self.gammas), "betas": list(self.betas), "shots": self.shots,
                "optimizer": {"method": self.optimizer.method, "max_evals": self.optimizer.max_evals,
                              "tolerance": self.optimizer.tolerance, "seed": self.optimizer.seed}}


@dataclass
class SolutionRecord:
    bitstring: str
    cost: float
    fidelity: float | None
    evals: int
    iteration_log: list[dict[str, Any]] = field(default_factory=list)
    timeline: list[dict[str, Any]] = field(default_factory=list)
    gammas: tuple[float, ...] = ()
    betas: tuple[float, ...] = ()
    reference: dict[str, Any] | None = None

    @property
    def x(self) -> np.ndarray:
        return as_bits(self.bitstring)

    def to_dict(self) -> dict[str, Any]:
        return {"bitstring": self.bitstring, "cost": self.cost, "fidelity": self.fidelity,
                "evals": self.evals, "gammas": list(self.gammas), "betas": list(self.betas),
                "reference": self.reference, "iteration_log": self.iteration_log,
                "timeline": self.timeline}


class OptimizationFailed(QorchError):
    """Backend failure during a solve; ``log`` holds the evaluations done so far."""

    code = "optimization_failed"

    def __init__(self, message: str, log: list[dict[str, Any]]) -> None:
        super().__init__(message)
        self.log = log


def build_qaoa_circuit(q: QuboProblem, gammas: Sequence[float], betas: Sequence[float]) -> Circuit:
    """``H^n``, then per layer ``exp(-i gamma H_cost)`` as RZ/RZZ and ``RX(2 beta)`` mixers."""
    if len(gammas) != len(betas) or len(gammas) == 0:
        raise ValueError("need equal, non-empty gamma and beta lists")
    n = q.size
    h, J = ising_terms(q)
    ops = [GateOp("H", (i,)) for i in range(n)]
    for g, b in zip(gammas, betas):
        for (i, j), w in J.items():
            ops.append(GateOp("RZZ", (i, j), (2 * g * w,)))
        for i in range(n):
            if abs(h[i]) > _EPS:
                ops.append(GateOp("RZ", (i,), (2 * g * h[i],)))
        ops += [GateOp("RX", (i,), (2 * b,)) for i in range(n)]
    return Circuit(n, tuple(ops), tuple(range(n)), f"qaoa-n{n}-p{len(gammas)}")


def counts_to_bits(counts: dict[str, int]) -> tuple[np.ndarray, np.ndarray]:
    keys = list(counts)
    bits = np.frombuffer("".join(keys).encode(), dtype=np.uint8).reshape(len(keys), -1) - ord("0")
    return bits, np.array([counts[k] for k in keys], dtype=float)


class _Budget(Exception):
    pass


def qaoa_solve(q: QuboProblem, params: QaoaParams | None = None, executor: Executor | None = None,
               selector: BackendSelector | None = None, reference: tuple[float, float] | None = None,
               with_fidelity: bool = True) -> SolutionRecord:
    """Minimise the mean sampled cost over ``(gamma, beta)``; return the best bitstring seen.

    Every evaluation samples with the optimizer seed (common random numbers),
    so the objective is a deterministic function of the angles. ``reference``
    is ``(best_cost, worst_cost)``; without it, sizes up to 24 are brute-forced
    to compute fidelity, larger sizes (or ``with_fidelity=False``) report
    ``fidelity=None``.

    Raises:
        OptimizationFailed: a circuit execution failed; carries the partial log.
    """
    params = params or QaoaParams()
    executor = executor or LocalExecutor()
    opt = params.optimizer
    p = params.p
    log: list[dict[str, Any]] = []
    best = {"cost": np.inf, "bits": np.zeros(q.size, dtype=np.int64)}
    x0 = np.array(params.gammas + params.betas)
    angles = {"mean": np.inf, "theta": x0}
    t0 = time.perf_counter()

    def objective(theta: np.ndarray) -> float:
        if len(log) >= opt.max_evals:
            raise _Budget
        circ = build_qaoa_circuit(q, theta[:p], theta[p:])
        try:
            res = executor.execute(circ, params.shots, selector, opt.seed)
        except QorchError as exc:
            raise OptimizationFailed(f"evaluation {len(log) + 1} failed: {exc}", log) from exc
        bits, weights = counts_to_bits(res.counts)
        costs = batch_costs(q, bits)
        k = int(np.argmin(costs))
        if costs[k] < best["cost"] - _EPS:
            best["cost"], best["bits"] = float(costs[k]), bits[k].astype(np.int64)
        mean = float(weights @ costs / weights.sum())
        if mean < angles["mean"]:
            angles["mean"], angles["theta"] = mean, np.array(theta)
        log.append({"eval": len(log) + 1, "mean_cost": mean, "best_cost": best["cost"],
                    "wall_ms": (time.perf_counter() - t0) * 1e3,
                    "jobs_in_flight": executor.jobs_in_flight})
        return mean

    simplex = np.vstack([x0] + [x0 + 0.2 * e for e in np.eye(2 * p)])
    try:
        scipy.optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"initial_simplex": simplex, "xatol": opt.tolerance,
                                         "fatol": np.inf, "maxfev": opt.max_evals})
    except _Budget:
        pass
    theta_best = angles["theta"]

    x = best["bits"]
    cost = qubo_cost(q, x)
    ref = reference
    if ref is None and with_fidelity and q.size <= MAX_BRUTE_FORCE:
        _, b, w = brute_force(q)
        ref = (b, w)
    fid = None if ref is None else fidelity(cost, ref[0], ref[1])
    return SolutionRecord(bits_to_str(x), cost, fid, len(log), log, [],
                          tuple(float(v) for v in theta_best[:p]), tuple(float(v) for v in theta_best[p:]),
                          None if ref is None else {"best_cost": ref[0], "worst_cost": ref[1]})
