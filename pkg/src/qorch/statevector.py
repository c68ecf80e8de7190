"""Dense state-vector engine.

Amplitudes are stored big-endian: qubit 0 is the most significant bit of the
basis index, so ``format(i, f"0{n}b")`` reads qubits left to right. Gates are
applied in place on strided views of the amplitude array; no operator matrix
larger than 4x4 is ever formed.

Shot sampling draws uniforms from numpy's PCG64 generator seeded with the
job seed and inverts the cumulative distribution with a binary search, so a
given ``(circuit, shots, seed)`` reproduces its counts exactly.
"""

from __future__ import annotations

import time
from typing import Callable, Sequence

import numpy as np

from . import gates
from .circuit import Circuit, GateOp, validate
from .errors import CapacityError, CircuitError
from .execution import ExecutionResult

DEFAULT_MAX_QUBITS = 26

StopHook = Callable[[], None]


class StateVector:
    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, num_qubits: int, amplitudes: np.ndarray) -> None:
        if amplitudes.shape != (1 << num_qubits,):
            raise ValueError(f"expected {1 << num_qubits} amplitudes, got shape {amplitudes.shape}")
        self.num_qubits = num_qubits
        self.amplitudes = amplitudes

    def copy(self) -> StateVector:
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits})"


def sv_init(n: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> StateVector:
    if n < 1:
        raise ValueError("need at least one qubit")
    if n > max_qubits:
        raise CapacityError(f"{n} qubits exceeds state-vector capacity of {max_qubits}")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n, amps)


def _check_qubits(state: StateVector, op: GateOp) -> None:
    for q in op.qubits:
        if not 0 <= q < state.num_qubits:
            raise CircuitError(f"qubit index {q} out of range for {state.num_qubits} qubits")


def _apply_1q(amps: np.ndarray, n: int, q: int, kind: str, params: tuple[float, ...]) -> None:
    v = amps.reshape(1 << q, 2, 1 << (n - q - 1))
    a0, a1 = v[:, 0, :], v[:, 1, :]
    if kind == "X":
        tmp = a0.copy()
        a0[...] = a1
        a1[...] = tmp
        return
    if kind in gates.DIAGONAL:
        d0, d1 = gates.diagonal(kind, params)
        if d0 != 1:
            a0 *= d0
        if d1 != 1:
            a1 *= d1
        return
    m = gates.gate_matrix(kind, params)
    tmp = a0.copy()
    a0 *= m[0, 0]
    a0 += m[0, 1] * a1
    a1 *= m[1, 1]
    a1 += m[1, 0] * tmp


def _blocks(amps: np.ndarray, n: int, a: int, b: int) -> dict[tuple[int, int], np.ndarray]:
    """Views keyed by (bit of ``a``, bit of ``b``)."""
    lo, hi = min(a, b), max(a, b)
    v = amps.reshape(1 << lo, 2, 1 << (hi - lo - 1), 2, 1 << (n - hi - 1))
    out = {}
    for i in (0, 1):
        for j in (0, 1):
            out[(i, j) if a < b else (j, i)] = v[:, i, :, j, :]
    return out


def _apply_2q(amps: np.ndarray, n: int, a: int, b: int, kind: str, params: tuple[float, ...]) -> None:
    blk = _blocks(amps, n, a, b)
    if kind == "CX":
        tmp = blk[1, 0].copy()
        blk[1, 0][...] = blk[1, 1]
        blk[1, 1][...] = tmp
        return
    if kind == "SWAP":
        tmp = blk[0, 1].copy()
        blk[0, 1][...] = blk[1, 0]
        blk[1, 0][...] = tmp
        return
    if kind in gates.DIAGONAL:
        for idx, d in enumerate(gates.diagonal(kind, params)):
            if d != 1:
                blk[idx >> 1, idx & 1][...] *= d
        return
    m = gates.gate_matrix(kind, params)
    if kind == "CRY":
        b0, b1 = blk[1, 0], blk[1, 1]
        tmp = b0.copy()
        b0 *= m[2, 2]
        b0 += m[2, 3] * b1
        b1 *= m[3, 3]
        b1 += m[3, 2] * tmp
        return
    keys = [(0, 0), (0, 1), (1, 0), (1, 1)]
    old = [blk[k].copy() for k in keys]
    for r, k in enumerate(keys):
        target = blk[k]
        target[...] = m[r, 0] * old[0]
        for c in (1, 2, 3):
            if m[r, c] != 0:
                target += m[r, c] * old[c]


def sv_apply(state: StateVector, op: GateOp) -> StateVector:
    """Apply ``op`` to ``state`` in place and return the same object."""
    _check_qubits(state, op)
    if op.kind in gates.ONE_QUBIT:
        _apply_1q(state.amplitudes, state.num_qubits, op.qubits[0], op.kind, op.params)
    elif op.kind in gates.TWO_QUBIT:
        a, b = op.qubits
        if a == b:
            raise CircuitError("two-qubit gate needs distinct qubits")
        _apply_2q(state.amplitudes, state.num_qubits, a, b, op.kind, op.params)
    else:
        raise CircuitError(f"unknown gate kind {op.kind!r}")
    return state


def sv_evolve(c: Circuit, max_qubits: int = DEFAULT_MAX_QUBITS,
              should_stop: StopHook | None = None) -> StateVector:
    """Final state of ``c`` from |0...0>; ``should_stop`` runs between gates and may raise."""
    problems = validate(c)
    if problems:
        raise CircuitError("; ".join(problems))
    state = sv_init(c.num_qubits, max_qubits)
    for op in c.ops:
        if should_stop is not None:
            should_stop()
        sv_apply(state, op)
    return state


def marginal_probabilities(state: StateVector, measured: Sequence[int]) -> np.ndarray:
    """Distribution over ``measured`` qubits, indexed big-endian in the given order."""
    n = state.num_qubits
    probs = state.probabilities()
    measured = list(measured)
    if measured == list(range(n)):
        return probs
    if not measured:
        return np.array([probs.sum()])
    t = probs.reshape([2] * n)
    others = tuple(q for q in range(n) if q not in measured)
    if others:
        t = t.sum(axis=others)
    kept = sorted(measured)
    t = np.transpose(t, [kept.index(q) for q in measured])
    return t.reshape(-1)


def sample_distribution(probs: np.ndarray, shots: int, seed: int, width: int) -> dict[str, int]:
    """Inverse-CDF sampling of ``shots`` outcomes with PCG64(seed)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    cdf = np.cumsum(probs)
    total = cdf[-1]
    u = rng.random(shots) * total
    idx = np.searchsorted(cdf, u, side="right")
    np.minimum(idx, len(cdf) - 1, out=idx)
    values, freq = np.unique(idx, return_counts=True)
    return {format(int(v), f"0{width}b") if width else "": int(f) for v, f in zip(values, freq)}


def sv_sample(state: StateVector, measured: Sequence[int], shots: int, seed: int) -> dict[str, int]:
    return sample_distribution(marginal_probabilities(state, measured), shots, seed, len(measured))


def sv_run(c: Circuit, shots: int, seed: int, max_qubits: int = DEFAULT_MAX_QUBITS,
           should_stop: StopHook | None = None) -> ExecutionResult:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    t0 = time.perf_counter()
    state = sv_evolve(c, max_qubits, should_stop)
    if should_stop is not None:
        should_stop()
    counts = sv_sample(state, c.measured_qubits, shots, seed)
    exec_ms = (time.perf_counter() - t0) * 1e3
    return ExecutionResult(counts, shots, "sv", -1, 0.0, exec_ms, seed)


def sv_expectation(state: StateVector, pauli: str) -> float:
    """<psi|P|psi> for a Pauli string over {I, Z}; character k acts on qubit k."""
    n = state.num_qubits
    if len(pauli) != n:
        raise ValueError(f"Pauli string has length {len(pauli)}, state has {n} qubits")
    if set(pauli) - {"I", "Z"}:
        raise ValueError("only I and Z letters are supported")
    t = state.probabilities().reshape([2] * n)
    for k in range(n - 1, -1, -1):
        t = t[..., 0] - t[..., 1] if pauli[k] == "Z" else t.sum(axis=-1)
    return float(t)
