"""Independent reference implementations used only by the tests.

Nothing here imports the engines: gate matrices come from matrix
exponentials of Pauli generators and full operators are assembled from
Kronecker products, so agreement with the stride kernels is meaningful.
"""

from __future__ import annotations

import itertools
from functools import reduce

import numpy as np
import scipy.linalg

from qorch.circuit import Circuit, GateOp

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)

ONE_Q = ("H", "X", "Y", "Z", "S", "Sdg", "T", "Tdg", "RX", "RY", "RZ")
TWO_Q = ("CX", "CZ", "RZZ", "SWAP", "CRY", "CP")
ROTATIONS = ("RX", "RY", "RZ", "RZZ", "CRY", "CP")


def _rot(pauli: np.ndarray, theta: float) -> np.ndarray:
    return scipy.linalg.expm(-0.5j * theta * pauli)


def _phase(lam: float) -> np.ndarray:
    return np.diag([1, np.exp(1j * lam)])


def oracle_gate(kind: str, params: tuple[float, ...] = ()) -> np.ndarray:
    th = params[0] if params else 0.0
    one = {
        "H": (X + Z) / np.sqrt(2), "X": X, "Y": Y, "Z": Z,
        "S": _phase(np.pi / 2), "Sdg": _phase(-np.pi / 2),
        "T": _phase(np.pi / 4), "Tdg": _phase(-np.pi / 4),
    }
    if kind in one:
        return one[kind]
    if kind == "RX":
        return _rot(X, th)
    if kind == "RY":
        return _rot(Y, th)
    if kind == "RZ":
        return _rot(Z, th)
    if kind == "RZZ":
        return _rot(np.kron(Z, Z), th)
    if kind == "CX":
        return np.kron(P0, I2) + np.kron(P1, X)
    if kind == "CZ":
        return np.kron(P0, I2) + np.kron(P1, Z)
    if kind == "CRY":
        return np.kron(P0, I2) + np.kron(P1, _rot(Y, th))
    if kind == "CP":
        return np.kron(P0, I2) + np.kron(P1, _phase(th))
    if kind == "SWAP":
        return sum(np.kron(a, b) for a, b in [(I2, I2), (X, X), (Y, Y), (Z, Z)]) / 2
    raise ValueError(kind)


def _site_ops(n: int, placed: dict[int, np.ndarray]) -> np.ndarray:
    return reduce(np.kron, [placed.get(q, I2) for q in range(n)])


def full_operator(n: int, op: GateOp) -> np.ndarray:
    """``2^n x 2^n`` matrix of ``op``; qubit 0 is the leftmost Kronecker factor."""
    g = oracle_gate(op.kind, op.params)
    if len(op.qubits) == 1:
        return _site_ops(n, {op.qubits[0]: g})
    a, b = op.qubits
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    for i, j, k, l in itertools.product((0, 1), repeat=4):
        v = g[2 * i + j, 2 * k + l]
        if v == 0:
            continue
        ea = np.zeros((2, 2), dtype=complex)
        eb = np.zeros((2, 2), dtype=complex)
        ea[i, k] = 1
        eb[j, l] = 1
        out += v * _site_ops(n, {a: ea, b: eb})
    return out


def circuit_unitary(c: Circuit) -> np.ndarray:
    u = np.eye(1 << c.num_qubits, dtype=complex)
    for op in c.ops:
        u = full_operator(c.num_qubits, op) @ u
    return u


def oracle_state(c: Circuit) -> np.ndarray:
    psi = np.zeros(1 << c.num_qubits, dtype=complex)
    psi[0] = 1
    for op in c.ops:
        psi = full_operator(c.num_qubits, op) @ psi
    return psi


def pauli_string_matrix(s: str) -> np.ndarray:
    table = {"I": I2, "X": X, "Y": Y, "Z": Z}
    return reduce(np.kron, [table[ch] for ch in s])


def tfim_exact_state(n: int, J: float, h: float, t: float, periodic: bool = False) -> np.ndarray:
    """``exp(-i t (J sum Z_i Z_{i+1} + h sum X_i)) |0...0>`` by dense expm."""
    ham = np.zeros((1 << n, 1 << n), dtype=complex)
    pairs = [(i, i + 1) for i in range(n - 1)] + ([(n - 1, 0)] if periodic and n > 2 else [])
    for a, b in pairs:
        ham += J * _site_ops(n, {a: Z, b: Z})
    for q in range(n):
        ham += h * _site_ops(n, {q: X})
    psi0 = np.zeros(1 << n, dtype=complex)
    psi0[0] = 1
    return scipy.linalg.expm(-1j * t * ham) @ psi0


def random_circuit(rng: np.random.Generator, n: int, n_ops: int,
                   kinds: tuple[str, ...] = ONE_Q + TWO_Q) -> Circuit:
    ops = []
    for _ in range(n_ops):
        kind = str(rng.choice([k for k in kinds if n >= 2 or k in ONE_Q]))
        if kind in ONE_Q:
            qs: tuple[int, ...] = (int(rng.integers(n)),)
        else:
            qs = tuple(int(q) for q in rng.choice(n, 2, replace=False))
        params = (float(rng.uniform(-2 * np.pi, 2 * np.pi)),) if kind in ROTATIONS else ()
        ops.append(GateOp(kind, qs, params))
    return Circuit(n, tuple(ops), tuple(range(n)))


def layered_circuit(rng: np.random.Generator, n: int, depth: int) -> Circuit:
    """``depth`` layers, each a random 1q gate on every qubit and a random brickwork of 2q gates."""
    ops = []
    for layer in range(depth):
        for q in range(n):
            kind = str(rng.choice(ONE_Q))
            ops.append(GateOp(kind, (q,), (float(rng.uniform(0, 2 * np.pi)),) if kind in ROTATIONS else ()))
        perm = rng.permutation(n)
        for k in range(layer % 2, n - 1, 2):
            kind = str(rng.choice(TWO_Q))
            ops.append(GateOp(kind, (int(perm[k]), int(perm[k + 1])),
                              (float(rng.uniform(0, 2 * np.pi)),) if kind in ROTATIONS else ()))
    return Circuit(n, tuple(ops), tuple(range(n)))


def naive_qubo_cost(Q: np.ndarray, x) -> float:
    total = 0.0
    for i in range(len(x)):
        for j in range(len(x)):
            total += Q[i][j] * x[i] * x[j]
    return total


def itertools_brute_force(Q: np.ndarray) -> tuple[tuple[int, ...], float, float]:
    best_x, best, worst = None, float("inf"), float("-inf")
    for x in itertools.product((0, 1), repeat=len(Q)):
        c = naive_qubo_cost(Q, x)
        if c < best - 1e-12:
            best_x, best = x, c
        worst = max(worst, c)
    return best_x, best, worst


def distribution(counts: dict[str, int], width: int) -> np.ndarray:
    p = np.zeros(1 << width)
    total = sum(counts.values())
    for k, v in counts.items():
        p[int(k, 2) if width else 0] += v / total
    return p


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())


def overlap(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2)
