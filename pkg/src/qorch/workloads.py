"""Circuit builders for the non-variational benchmarks: GHZ, HAM, TFIM and HHL."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .circuit import Circuit, GateOp
from .synthesis import diagonal_ops, state_preparation, synthesize_unitary, uniformly_controlled_rotation

GHZ_SIZES = (4, 8, 12, 16, 20, 24, 28, 30, 32)
HAM_SIZES = GHZ_SIZES
TFIM_SIZES = GHZ_SIZES
HHL_SIZES = (5, 7, 9, 11, 13, 15, 17)


def build_ghz(n: int) -> Circuit:
    if n < 2:
        raise ValueError("GHZ needs at least 2 qubits")
    ops = [GateOp("H", (0,))] + [GateOp("CX", (i, i + 1)) for i in range(n - 1)]
    return Circuit(n, tuple(ops), tuple(range(n)), f"ghz-{n}")


def default_steps(n: int) -> int:
    return max(1, math.ceil(n / 4))


def build_ham(n: int, steps: int | None = None) -> Circuit:
    """Ising Hamiltonian simulation in the SupermarQ style.

    The register is framed in the X basis by a Hadamard layer on each side.
    Each of ``steps`` Trotter steps applies a driven transverse rotation
    ``RX(2*dt*cos(t_k))`` with ``t_k`` the step midpoint, then ``RZZ(2*dt)``
    on every nearest-neighbour pair. Couplings and total time are fixed at 1.
    """
    steps = default_steps(n) if steps is None else steps
    if n < 2:
        raise ValueError("HAM needs at least 2 qubits")
    if steps < 1:
        raise ValueError("HAM needs at least one Trotter step")
    dt = 1.0 / steps
    ops = [GateOp("H", (q,)) for q in range(n)]
    for k in range(steps):
        drive = 2 * dt * math.cos((k + 0.5) * dt)
        ops += [GateOp("RX", (q,), (drive,)) for q in range(n)]
        ops += [GateOp("RZZ", (q, q + 1), (2 * dt,)) for q in range(n - 1)]
    ops += [GateOp("H", (q,)) for q in range(n)]
    return Circuit(n, tuple(ops), tuple(range(n)), f"ham-{n}-s{steps}")


@dataclass(frozen=True)
class TfimSpec:
    n: int
    J: float = 1.0
    h: float = 1.0
    t: float = 1.0
    steps: int | None = None
    boundary: str = "open"
    order: int = 2

    def __post_init__(self) -> None:
        if self.steps is None:
            object.__setattr__(self, "steps", default_steps(self.n))
        if self.n < 2:
            raise ValueError("TFIM needs n >= 2")
        if self.steps < 1:
            raise ValueError("TFIM needs steps >= 1")
        if self.boundary not in ("open", "periodic"):
            raise ValueError("boundary must be 'open' or 'periodic'")
        if self.order not in (1, 2):
            raise ValueError("Trotter order must be 1 or 2")

    def pairs(self) -> list[tuple[int, int]]:
        pairs = [(i, i + 1) for i in range(self.n - 1)]
        if self.boundary == "periodic" and self.n > 2:
            pairs.append((self.n - 1, 0))
        return pairs


def build_tfim(spec: TfimSpec) -> Circuit:
    """Trotter circuit for ``exp(-i t (J sum ZZ + h sum X))`` from |0...0>.

    Every step applies ``RZZ(2 J dt)`` on the coupled pairs and then
    ``RX(2 h dt)`` on each qubit. With ``order=2`` (default) the sequence is
    the symmetric split: an extra ``RX(h dt)`` layer opens the circuit and the
    final RX layer is halved, which costs one layer and turns the error from
    O(dt) into O(dt^2).
    """
    dt = spec.t / spec.steps
    x_full = 2 * spec.h * dt
    ops: list[GateOp] = []
    if spec.order == 2:
        ops += [GateOp("RX", (q,), (x_full / 2,)) for q in range(spec.n)]
    for k in range(spec.steps):
        ops += [GateOp("RZZ", p, (2 * spec.J * dt,)) for p in spec.pairs()]
        angle = x_full / 2 if spec.order == 2 and k == spec.steps - 1 else x_full
        ops += [GateOp("RX", (q,), (angle,)) for q in range(spec.n)]
    return Circuit(spec.n, tuple(ops), tuple(range(spec.n)), f"tfim-{spec.n}-s{spec.steps}")


def tfim_hamiltonian(spec: TfimSpec) -> np.ndarray:
    """Dense ``J sum ZZ + h sum X`` matching :func:`build_tfim` (small n only)."""
    n = spec.n
    z = np.array([1.0, -1.0])
    diag = np.zeros(1 << n)
    bits = ((np.arange(1 << n)[:, None] >> (n - 1 - np.arange(n))) & 1)
    spins = z[bits]
    for a, b in spec.pairs():
        diag += spec.J * spins[:, a] * spins[:, b]
    ham = np.diag(diag).astype(complex)
    idx = np.arange(1 << n)
    for q in range(n):
        ham[idx ^ (1 << (n - 1 - q)), idx] += spec.h
    return ham


# -- HHL -----------------------------------------------------------------------

@dataclass(frozen=True)
class HhlProblem:
    """Linear system for HHL plus its phase-estimation parameters.

    Use :meth:`for_system` to get the default ``evolution_time`` (largest
    eigenvalue lands on clock value 3N/4) and ``rotation_constant``
    (0.9 times the smallest eigenvalue on the clock grid, in grid units).
    """

    A: np.ndarray
    b: np.ndarray
    n_clock: int
    evolution_time: float
    rotation_constant: float
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)
    eigenvectors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        a = np.asarray(self.A, dtype=complex)
        b = np.asarray(self.b, dtype=complex)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", b)
        problems = self._problems()
        if problems:
            raise ValueError("invalid HHL problem: " + "; ".join(problems))
        w, v = np.linalg.eigh(a)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)
        scaled = w * self.evolution_time
        if np.any(scaled <= 0) or np.any(scaled >= 2 * math.pi):
            raise ValueError("eigenvalues times evolution_time must lie in (0, 2*pi)")
        if self.rotation_constant > self.grid_eigenvalues().min() + 1e-9 or self.rotation_constant <= 0:
            raise ValueError("rotation_constant must be positive and at most the smallest grid eigenvalue")

    def _problems(self) -> list[str]:
        a, b = self.A, self.b
        out = []
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            return ["A must be square"]
        d = a.shape[0]
        if d < 2 or d & (d - 1):
            out.append("dimension of A must be a power of two >= 2")
        if not np.allclose(a, a.conj().T, atol=1e-12, rtol=0):
            out.append("A must be Hermitian")
        if b.shape != (d,):
            out.append("b must match the dimension of A")
        elif abs(np.linalg.norm(b) - 1) > 1e-12:
            out.append("b must be normalised")
        if self.n_clock < 1:
            out.append("n_clock must be >= 1")
        return out

    @property
    def n_b(self) -> int:
        return int(self.A.shape[0]).bit_length() - 1

    @property
    def num_qubits(self) -> int:
        return self.n_b + self.n_clock + 1

    def grid_eigenvalues(self) -> np.ndarray:
        """Eigenvalues in clock-grid units: ``lambda * t0 * 2**n_clock / (2 pi)``."""
        return self.eigenvalues * self.evolution_time * (1 << self.n_clock) / (2 * math.pi)

    @classmethod
    def for_system(cls, A, b, n_clock: int) -> HhlProblem:
        a = np.asarray(A, dtype=complex)
        w = np.linalg.eigvalsh(a)
        if w.min() <= 0:
            raise ValueError("A must be positive definite")
        size = 1 << n_clock
        top = 3 * size / 4 if size >= 4 else 1.0
        t0 = 2 * math.pi * top / (size * w.max())
        grid_min = max(1.0, round(w.min() * t0 * size / (2 * math.pi)))
        c = 0.9 * min(grid_min, w.min() * t0 * size / (2 * math.pi))
        bb = np.asarray(b, dtype=complex)
        return cls(a, bb / np.linalg.norm(bb), n_clock, t0, c)

    def classical_distribution(self) -> np.ndarray:
        x = np.linalg.solve(self.A, self.b)
        p = np.abs(x) ** 2
        return p / p.sum()


def load_hhl_problem(path: str | Path, n_clock: int | None = None) -> HhlProblem:
    """Read ``{"A": [[[re, im], ...], ...], "b": [[re, im], ...]}``.

    ``A`` may also be a flat row-major list of ``[re, im]`` pairs.
    """
    data = json.loads(Path(path).read_text())
    return hhl_problem_from_json(data, n_clock)


def hhl_problem_from_json(data: Mapping, n_clock: int | None = None) -> HhlProblem:
    def cplx(pairs) -> np.ndarray:
        arr = np.asarray(pairs, dtype=float)
        return arr[..., 0] + 1j * arr[..., 1]

    a = cplx(data["A"])
    if a.ndim == 1:
        d = math.isqrt(a.size)
        if d * d != a.size:
            raise ValueError("flat A must have a square number of entries")
        a = a.reshape(d, d)
    b = cplx(data["b"])
    nb = int(a.shape[0]).bit_length() - 1
    return HhlProblem.for_system(a, b, n_clock or int(data.get("n_clock", nb)))


def toeplitz_problem(n_b: int) -> tuple[np.ndarray, np.ndarray]:
    """Benchmark system: tridiagonal Toeplitz (2 on the diagonal, -1/3 beside), b = last basis vector."""
    d = 1 << n_b
    a = 2 * np.eye(d) - (np.eye(d, k=1) + np.eye(d, k=-1)) / 3
    b = np.zeros(d)
    b[-1] = 1
    return a, b


def hhl_benchmark_problem(total_qubits: int) -> HhlProblem:
    if total_qubits < 3 or total_qubits % 2 == 0:
        raise ValueError("HHL total qubit count must be odd and >= 3")
    n_b = (total_qubits - 1) // 2
    a, b = toeplitz_problem(n_b)
    return HhlProblem.for_system(a, b, n_b)


def qft_ops(qubits: list[int]) -> list[GateOp]:
    """QFT with ``qubits[0]`` as the most significant bit, including the output swaps."""
    t = len(qubits)
    ops: list[GateOp] = []
    for j in range(t):
        ops.append(GateOp("H", (qubits[j],)))
        for m in range(j + 1, t):
            ops.append(GateOp("CP", (qubits[m], qubits[j]), (2 * math.pi / (1 << (m - j + 1)),)))
    for j in range(t // 2):
        ops.append(GateOp("SWAP", (qubits[j], qubits[t - 1 - j])))
    return ops


def _inverse(ops: list[GateOp]) -> list[GateOp]:
    return [op.inverse() for op in reversed(ops)]


def build_hhl(p: HhlProblem) -> Circuit:
    """HHL circuit on ``1 + n_clock + n_b`` qubits.

    Layout: qubit 0 is the ancilla, qubits ``1..n_clock`` the clock register
    (qubit 1 most significant), the rest hold |b>. Measured qubits are the
    ancilla followed by the solution register, so post-selection keeps
    bitstrings starting with ``"1"``.

    ``exp(i A t)`` is controlled in the eigenbasis of ``A``: the input is
    prepared directly as ``V^dagger b``, each controlled power becomes an exact
    diagonal phase circuit, and one synthesised ``V`` rotates the solution back.
    Conjugating by ``V`` commutes with the clock-only steps, so this equals
    the textbook circuit with every controlled-U compiled exactly.
    """
    nb, nc = p.n_b, p.n_clock
    clock = list(range(1, nc + 1))
    sysreg = list(range(nc + 1, nc + 1 + nb))
    lam, vecs = p.eigenvalues, p.eigenvectors

    ops = state_preparation(vecs.conj().T @ p.b, sysreg)
    qpe = [GateOp("H", (q,)) for q in clock]
    for i, cq in enumerate(clock):
        power = 1 << (nc - 1 - i)
        phases = np.concatenate([np.zeros(1 << nb), lam * power * p.evolution_time])
        qpe += diagonal_ops(phases, [cq] + sysreg)[0]
    qpe += _inverse(qft_ops(clock))
    ops += qpe
    size = 1 << nc
    angles = np.zeros(size)
    k = np.arange(1, size)
    angles[1:] = 2 * np.arcsin(np.minimum(1.0, p.rotation_constant / k))
    ops += uniformly_controlled_rotation("Y", angles, clock, 0)
    ops += _inverse(qpe)
    ops += synthesize_unitary(vecs, sysreg)
    return Circuit(p.num_qubits, tuple(ops), tuple([0] + sysreg), f"hhl-{p.num_qubits}")


def hhl_postselect(counts: Mapping[str, int]) -> tuple[dict[str, int], int]:
    """Solution-register counts conditioned on ancilla = 1, and the accepted shot total."""
    kept: dict[str, int] = {}
    for key, v in counts.items():
        if key.startswith("1"):
            kept[key[1:]] = kept.get(key[1:], 0) + v
    return kept, sum(kept.values())
