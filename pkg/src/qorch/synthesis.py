"""Exact compilation of small dense operators into the IR gate set.

All routines take ``qubits`` in big-endian order: ``qubits[0]`` carries the
most significant bit of the matrix/vector index. Results are exact up to a
global phase, which is dropped.
"""

from __future__ import annotations

import cmath
import math
from typing import Sequence

import numpy as np
import scipy.linalg

from .circuit import GateOp

_EPS = 1e-14


def uniformly_controlled_rotation(axis: str, angles: Sequence[float], controls: Sequence[int],
                                  target: int) -> list[GateOp]:
    """Rotation ``R_axis(angles[j])`` on ``target`` when ``controls`` hold value ``j``.

    Built recursively from CX and single-axis rotations: conditioning on the
    last control splits each angle pair into a common part and a part whose
    sign is flipped by two CX gates.
    """
    kind = {"Y": "RY", "Z": "RZ"}[axis]
    angles = np.asarray(angles, dtype=float)
    if len(angles) != 1 << len(controls):
        raise ValueError("need 2**len(controls) angles")
    if not controls:
        return [GateOp(kind, (target,), (float(angles[0]),))] if abs(angles[0]) > _EPS else []
    pairs = angles.reshape(-1, 2)
    common = (pairs[:, 0] + pairs[:, 1]) / 2
    flipped = (pairs[:, 0] - pairs[:, 1]) / 2
    last = controls[-1]
    ops = uniformly_controlled_rotation(axis, common, controls[:-1], target)
    if np.any(np.abs(flipped) > _EPS):
        ops.append(GateOp("CX", (last, target)))
        ops += uniformly_controlled_rotation(axis, flipped, controls[:-1], target)
        ops.append(GateOp("CX", (last, target)))
    return ops


def diagonal_ops(phases: Sequence[float], qubits: Sequence[int]) -> tuple[list[GateOp], float]:
    """Gates for ``diag(exp(1j * phases))``; also returns the dropped global phase."""
    phases = np.asarray(phases, dtype=float)
    if len(phases) != 1 << len(qubits):
        raise ValueError("need 2**len(qubits) phases")
    if not qubits:
        return [], float(phases[0])
    pairs = phases.reshape(-1, 2)
    ops = uniformly_controlled_rotation("Z", pairs[:, 1] - pairs[:, 0], qubits[:-1], qubits[-1])
    rest, global_phase = diagonal_ops(pairs.mean(axis=1), qubits[:-1])
    return rest + ops, global_phase


def state_preparation(vector: Sequence[complex], qubits: Sequence[int]) -> list[GateOp]:
    """Gates taking |0...0> to ``vector / ||vector||`` (up to global phase)."""
    v = np.asarray(vector, dtype=complex)
    m = len(qubits)
    if len(v) != 1 << m:
        raise ValueError("vector length must be 2**len(qubits)")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("cannot prepare the zero vector")
    v = v / norm
    mags = np.abs(v)
    ops: list[GateOp] = []
    for level in range(m):
        blocks = mags.reshape(1 << level, 2, -1)
        w0 = np.linalg.norm(blocks[:, 0, :], axis=1)
        w1 = np.linalg.norm(blocks[:, 1, :], axis=1)
        ops += uniformly_controlled_rotation("Y", 2 * np.arctan2(w1, w0), qubits[:level], qubits[level])
    phases = np.where(mags > _EPS, np.angle(v), 0.0)
    if np.any(np.abs(phases) > _EPS):
        ops += diagonal_ops(phases, qubits)[0]
    return ops


def _zyz(u: np.ndarray, q: int) -> list[GateOp]:
    det = np.linalg.det(u)
    v = u / cmath.sqrt(det)
    gamma = 2 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    plus = 2 * cmath.phase(v[1, 1]) if abs(v[1, 1]) > 1e-12 else 0.0
    minus = 2 * cmath.phase(v[1, 0]) if abs(v[1, 0]) > 1e-12 else 0.0
    beta, delta = (plus + minus) / 2, (plus - minus) / 2
    ops = []
    for kind, angle in (("RZ", delta), ("RY", gamma), ("RZ", beta)):
        if abs(math.remainder(angle, 4 * math.pi)) > _EPS:
            ops.append(GateOp(kind, (q,), (angle,)))
    return ops


def _demultiplex(a: np.ndarray, b: np.ndarray, select: int, rest: Sequence[int]) -> list[GateOp]:
    """``diag(a, b)`` with ``select`` choosing the block, as W, multiplexed RZ, V."""
    t, z = scipy.linalg.schur(a @ b.conj().T, output="complex")
    d = np.sqrt(np.diag(t).astype(complex))
    w = np.diag(d) @ z.conj().T @ b
    return (synthesize_unitary(w, rest)
            + uniformly_controlled_rotation("Z", -2 * np.angle(d), rest, select)
            + synthesize_unitary(z, rest))


def synthesize_unitary(u: np.ndarray, qubits: Sequence[int]) -> list[GateOp]:
    """Quantum Shannon decomposition of a ``2**k x 2**k`` unitary."""
    u = np.asarray(u, dtype=complex)
    k = len(qubits)
    if u.shape != (1 << k, 1 << k):
        raise ValueError("matrix size does not match qubit count")
    if k == 1:
        return _zyz(u, qubits[0])
    half = 1 << (k - 1)
    (u1, u2), theta, (v1h, v2h) = scipy.linalg.cossin(u, p=half, q=half, separate=True)
    top, rest = qubits[0], list(qubits[1:])
    return (_demultiplex(v1h, v2h, top, rest)
            + uniformly_controlled_rotation("Y", 2 * theta, rest, top)
            + _demultiplex(u1, u2, top, rest))


def ops_unitary(ops: Sequence[GateOp], qubits: Sequence[int]) -> np.ndarray:
    """Dense unitary of ``ops`` restricted to ``qubits`` (small sizes only)."""
    from .statevector import StateVector, sv_apply

    index = {q: i for i, q in enumerate(qubits)}
    k = len(qubits)
    out = np.zeros((1 << k, 1 << k), dtype=complex)
    for col in range(1 << k):
        amps = np.zeros(1 << k, dtype=complex)
        amps[col] = 1
        st = StateVector(k, amps)
        for op in ops:
            sv_apply(st, GateOp(op.kind, tuple(index[q] for q in op.qubits), op.params))
        out[:, col] = st.amplitudes
    return out
