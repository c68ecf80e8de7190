"""Matrix-product-state engine with SVD truncation.

Site tensors have shape ``(left_bond, 2, right_bond)``. The state is kept in
mixed-canonical form around ``center``: tensors left of it are
left-orthonormal, tensors right of it right-orthonormal. Two-qubit gates are
applied to adjacent sites by contracting the pair, applying the 4x4 unitary
and re-splitting with an SVD; non-adjacent pairs are brought together with a
SWAP chain and moved back afterwards.

Truncation keeps at most ``chi_max`` singular values and drops any with
``sigma_i / sigma_0 < trunc_threshold``. The discarded squared weight is
accumulated in ``cumulative_trunc_error`` and the kept spectrum renormalised.
"""

from __future__ import annotations

import time
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import gates
from .circuit import Circuit, GateOp, validate
from .errors import CapacityError, CircuitError
from .execution import ExecutionResult
from .statevector import StateVector

DEFAULT_CHI = 64
DEFAULT_THRESHOLD = 1e-12
MAX_DENSE_QUBITS = 20

_SWAP = gates.gate_matrix("SWAP")


class MpsState:
    def __init__(self, num_qubits: int, tensors: list[np.ndarray], chi_max: int,
                 trunc_threshold: float) -> None:
        self.num_qubits = num_qubits
        self.tensors = tensors
        self.chi_max = chi_max
        self.trunc_threshold = trunc_threshold
        self.cumulative_trunc_error = 0.0
        self.center = 0

    def bond_dims(self) -> list[int]:
        """Dimensions of the n-1 internal bonds."""
        return [t.shape[2] for t in self.tensors[:-1]]

    def max_bond(self) -> int:
        return max(self.bond_dims(), default=1)

    def norm(self) -> float:
        t = self.tensors[self.center]
        return float(np.vdot(t, t).real)

    def copy(self) -> MpsState:
        out = MpsState(self.num_qubits, [t.copy() for t in self.tensors], self.chi_max,
                       self.trunc_threshold)
        out.cumulative_trunc_error = self.cumulative_trunc_error
        out.center = self.center
        return out

    def __repr__(self) -> str:
        return (f"MpsState(num_qubits={self.num_qubits}, chi_max={self.chi_max}, "
                f"max_bond={self.max_bond()})")


def mps_init(n: int, chi_max: int = DEFAULT_CHI, trunc_threshold: float = DEFAULT_THRESHOLD) -> MpsState:
    if n < 1:
        raise ValueError("need at least one qubit")
    if chi_max < 1:
        raise ValueError("chi_max must be >= 1")
    if trunc_threshold < 0:
        raise ValueError("trunc_threshold must be >= 0")
    zero = np.zeros((1, 2, 1), dtype=np.complex128)
    zero[0, 0, 0] = 1.0
    return MpsState(n, [zero.copy() for _ in range(n)], chi_max, trunc_threshold)


# -- canonical form ------------------------------------------------------------

def _move_center(state: MpsState, k: int) -> None:
    ts = state.tensors
    while state.center < k:
        c = state.center
        l, d, r = ts[c].shape
        q, rr = np.linalg.qr(ts[c].reshape(l * d, r))
        ts[c] = q.reshape(l, d, q.shape[1])
        ts[c + 1] = np.tensordot(rr, ts[c + 1], axes=(1, 0))
        state.center += 1
    while state.center > k:
        c = state.center
        l, d, r = ts[c].shape
        q, rr = np.linalg.qr(ts[c].reshape(l, d * r).T)
        ts[c] = q.T.reshape(q.shape[1], d, r)
        ts[c - 1] = np.tensordot(ts[c - 1], rr.T, axes=(2, 0))
        state.center -= 1


def _svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


# -- gate application --------------------------------------------------------

def _apply_adjacent(state: MpsState, k: int, g: np.ndarray) -> None:
    """Apply 4x4 ``g`` on sites (k, k+1), ordered big-endian as (k, k+1)."""
    _move_center(state, k)
    a, b = state.tensors[k], state.tensors[k + 1]
    l, r = a.shape[0], b.shape[2]
    theta = np.tensordot(a, b, axes=(2, 0))  # (l, 2, 2, r)
    theta = np.einsum("abcd,lcdr->labr", g.reshape(2, 2, 2, 2), theta)
    u, s, vh = _svd(theta.reshape(l * 2, 2 * r))
    total = float(np.sum(s * s))
    keep = len(s)
    if s[0] > 0 and state.trunc_threshold > 0:
        keep = int(np.count_nonzero(s / s[0] >= state.trunc_threshold))
    keep = max(1, min(keep, state.chi_max))
    if keep < len(s) and total > 0:
        state.cumulative_trunc_error += float(np.sum(s[keep:] ** 2)) / total
    s = s[:keep]
    s = s / np.linalg.norm(s)
    state.tensors[k] = u[:, :keep].reshape(l, 2, keep)
    state.tensors[k + 1] = (s[:, None] * vh[:keep]).reshape(keep, 2, r)
    state.center = k + 1


def _apply_two(state: MpsState, a: int, b: int, g: np.ndarray) -> None:
    if a > b:
        a, b = b, a
        g = _SWAP @ g @ _SWAP
    # g now acts on (a, b) with a < b; carry b leftwards next to a
    path = list(range(b - 1, a, -1))
    for j in path:
        _apply_adjacent(state, j, _SWAP)
    _apply_adjacent(state, a, g)
    for j in reversed(path):
        _apply_adjacent(state, j, _SWAP)


def mps_apply(state: MpsState, op: GateOp) -> MpsState:
    """Apply ``op`` in place and return ``state``."""
    for q in op.qubits:
        if not 0 <= q < state.num_qubits:
            raise CircuitError(f"qubit index {q} out of range for {state.num_qubits} qubits")
    g = gates.gate_matrix(op.kind, op.params)
    if op.kind in gates.ONE_QUBIT:
        q = op.qubits[0]
        state.tensors[q] = np.einsum("st,ltr->lsr", g, state.tensors[q])
    else:
        a, b = op.qubits
        if a == b:
            raise CircuitError("two-qubit gate needs distinct qubits")
        _apply_two(state, a, b, g)
    return state


def mps_evolve(c: Circuit, chi_max: int = DEFAULT_CHI, trunc_threshold: float = DEFAULT_THRESHOLD,
               should_stop: Callable[[], None] | None = None) -> MpsState:
    problems = validate(c)
    if problems:
        raise CircuitError("; ".join(problems))
    state = mps_init(c.num_qubits, chi_max, trunc_threshold)
    for op in c.ops:
        if should_stop is not None:
            should_stop()
        mps_apply(state, op)
    return state


# -- readout -------------------------------------------------------------------

def mps_sample(state: MpsState, measured: Sequence[int], shots: int, seed: int) -> dict[str, int]:
    """Sequential conditional sampling, site by site.

    Shots sharing a prefix are carried as one branch whose count is split
    binomially at every site, so the cost scales with the number of distinct
    outcomes rather than with ``shots``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    measured = list(measured)
    if not measured:
        return {"": shots}
    rng = np.random.Generator(np.random.PCG64(seed))
    _move_center(state, 0)
    last = max(measured)
    env = np.ones((1, 1), dtype=np.complex128)
    counts = np.array([shots], dtype=np.int64)
    bits = np.zeros((1, 0), dtype=np.uint8)
    for k in range(last + 1):
        a = state.tensors[k]
        w0 = env @ a[:, 0, :]
        w1 = env @ a[:, 1, :]
        n0 = np.einsum("gr,gr->g", w0.conj(), w0).real
        n1 = np.einsum("gr,gr->g", w1.conj(), w1).real
        tot = n0 + n1
        p1 = np.where(tot > 0, n1 / np.where(tot > 0, tot, 1.0), 0.5)
        ones = rng.binomial(counts, np.clip(p1, 0.0, 1.0))
        zeros = counts - ones
        keep0, keep1 = zeros > 0, ones > 0
        env = np.concatenate([w0[keep0] / np.sqrt(n0[keep0])[:, None],
                              w1[keep1] / np.sqrt(n1[keep1])[:, None]])
        counts = np.concatenate([zeros[keep0], ones[keep1]])
        bits = np.concatenate([
            np.column_stack([bits[keep0], np.zeros(keep0.sum(), np.uint8)]),
            np.column_stack([bits[keep1], np.ones(keep1.sum(), np.uint8)]),
        ])
    out: dict[str, int] = {}
    chars = np.array(["0", "1"])
    for row, cnt in zip(bits[:, measured], counts):
        key = "".join(chars[row])
        out[key] = out.get(key, 0) + int(cnt)
    return dict(sorted(out.items()))


def mps_to_statevector(state: MpsState) -> StateVector:
    n = state.num_qubits
    if n > MAX_DENSE_QUBITS:
        raise CapacityError(f"refusing to densify {n} qubits (limit {MAX_DENSE_QUBITS})")
    psi = state.tensors[0].reshape(2, -1)
    for t in state.tensors[1:]:
        psi = (psi @ t.reshape(t.shape[0], -1)).reshape(-1, t.shape[2])
    return StateVector(n, psi.reshape(-1).astype(np.complex128, copy=True))


def mps_run(c: Circuit, shots: int, seed: int, chi_max: int = DEFAULT_CHI,
            trunc_threshold: float = DEFAULT_THRESHOLD,
            should_stop: Callable[[], None] | None = None) -> ExecutionResult:
    t0 = time.perf_counter()
    state = mps_evolve(c, chi_max, trunc_threshold, should_stop)
    if should_stop is not None:
        should_stop()
    counts = mps_sample(state, c.measured_qubits, shots, seed)
    return ExecutionResult(counts, shots, "mps", -1, 0.0, (time.perf_counter() - t0) * 1e3, seed)
