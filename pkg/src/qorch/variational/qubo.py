"""QUBO model: cost, exhaustive reference, clamped sub-problems, Ising form."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

MAX_BRUTE_FORCE = 24
_CHUNK_BITS = 16


@dataclass(frozen=True, eq=False)
class QuboProblem:
    """``cost(x) = x^T Q x`` over binary ``x``; ``Q`` symmetric, diagonal = linear terms."""

    Q: np.ndarray

    def __post_init__(self) -> None:
        q = np.array(self.Q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
            raise ValueError(f"Q must be a non-empty square matrix, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("Q has non-finite entries")
        if not np.allclose(q, q.T, atol=1e-12, rtol=0):
            raise ValueError("Q must be symmetric within 1e-12")
        q.flags.writeable = False
        object.__setattr__(self, "Q", q)

    @property
    def size(self) -> int:
        return self.Q.shape[0]

    def to_json(self) -> dict:
        iu = np.argwhere(np.triu(self.Q) != 0)
        return {"size": self.size, "entries": [[int(i), int(j), float(self.Q[i, j])] for i, j in iu]}

    @classmethod
    def from_json(cls, data: Mapping) -> QuboProblem:
        """Load ``{size, entries: [[i, j, v], ...]}``; a missing mirror entry is filled in."""
        n = int(data["size"])
        q = np.zeros((n, n))
        given = np.zeros((n, n), dtype=bool)
        for i, j, v in data["entries"]:
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"entry ({i}, {j}) out of range for size {n}")
            q[i, j] = float(v)
            given[i, j] = True
        for i, j in zip(*np.nonzero(given & ~given.T)):
            q[j, i] = q[i, j]
        if not np.allclose(q, q.T, atol=1e-12, rtol=0):
            raise ValueError("entries (i, j) and (j, i) disagree")
        return cls(q)

    @classmethod
    def load(cls, path: str | Path) -> QuboProblem:
        return cls.from_json(json.loads(Path(path).read_text()))

    def __repr__(self) -> str:
        return f"QuboProblem(size={self.size}, nonzeros={int(np.count_nonzero(self.Q))})"


def random_qubo(n: int, seed: int = 0, density: float = 0.5) -> QuboProblem:
    """Symmetric matrix with entries uniform in [-1, 1]; each upper entry kept with ``density``."""
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-1.0, 1.0, size=(n, n))
    mask = rng.random((n, n)) < density
    upper = np.triu(vals * mask)
    return QuboProblem(upper + np.triu(upper, 1).T)


def as_bits(x: Sequence[int] | str | np.ndarray) -> np.ndarray:
    if isinstance(x, str):
        return np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    return np.asarray(x, dtype=np.int64)


def bits_to_str(x: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in x)


def qubo_cost(q: QuboProblem, x: Sequence[int] | str | np.ndarray) -> float:
    x = as_bits(x).astype(float)
    if x.shape != (q.size,):
        raise ValueError(f"bitvector length {x.shape[0] if x.ndim else 0} does not match size {q.size}")
    return float(x @ q.Q @ x)


def batch_costs(q: QuboProblem, bits: np.ndarray) -> np.ndarray:
    """Costs of the rows of a ``(m, N)`` 0/1 matrix."""
    b = bits.astype(float)
    return np.einsum("mi,mi->m", b @ q.Q, b)


def _index_bits(start: int, stop: int, n: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def brute_force(q: QuboProblem) -> tuple[np.ndarray, float, float]:
    """Exhaustive ``(best_x, best_cost, worst_cost)``.

    States are enumerated in lexicographic order of their bitstrings, so the
    first minimum found is the lexicographically smallest optimum.
    """
    n = q.size
    if n > MAX_BRUTE_FORCE:
        raise ValueError(f"brute force limited to {MAX_BRUTE_FORCE} variables, got {n}")
    total = 1 << n
    step = 1 << min(n, _CHUNK_BITS)
    best_i, best, worst = 0, np.inf, -np.inf
    for start in range(0, total, step):
        costs = batch_costs(q, _index_bits(start, start + step, n))
        k = int(np.argmin(costs))
        if costs[k] < best:
            best, best_i = float(costs[k]), start + k
        worst = max(worst, float(costs.max()))
    return _index_bits(best_i, best_i + 1, n)[0].astype(np.int64), best, worst


def fidelity(found_cost: float, best_cost: float, worst_cost: float) -> float:
    """``(worst - found) / (worst - best)`` clamped to [0, 1]; 1 for a flat objective."""
    span = worst_cost - best_cost
    if span <= 0 or found_cost <= best_cost + 1e-12 * max(1.0, span):
        return 1.0
    return float(min(1.0, max(0.0, (worst_cost - found_cost) / span)))


def extract_subqubo(q: QuboProblem, current_x: Sequence[int] | np.ndarray,
                    indices: Sequence[int]) -> QuboProblem:
    """Sub-QUBO over ``indices`` with every other variable clamped to ``current_x``.

    Couplings to clamped variables fold into the diagonal:
    ``Q'_ii += sum_{j not in S} (Q_ij + Q_ji) x_j``.
    """
    x = as_bits(current_x)
    if x.shape != (q.size,):
        raise ValueError("current_x length does not match the problem size")
    idx = [int(i) for i in indices]
    if len(set(idx)) != len(idx):
        raise ValueError("indices must be distinct")
    if any(not 0 <= i < q.size for i in idx):
        raise ValueError(f"indices must lie in [0, {q.size})")
    if not idx:
        raise ValueError("need at least one index")
    sel = np.array(idx)
    outside = np.ones(q.size, dtype=bool)
    outside[sel] = False
    sub = q.Q[np.ix_(sel, sel)].copy()
    field = (q.Q[np.ix_(sel, outside)] + q.Q[np.ix_(outside, sel)].T) @ x[outside]
    sub[np.diag_indices_from(sub)] += field
    return QuboProblem(sub)


def ising_terms(q: QuboProblem) -> tuple[np.ndarray, dict[tuple[int, int], float]]:
    """Map ``x = (1 - z) / 2`` and drop constants: ``H = sum h_i Z_i + sum_{i<j} J_ij Z_i Z_j``."""
    Q = q.Q
    off = Q - np.diag(np.diag(Q))
    h = -np.diag(Q) / 2 - off.sum(axis=1) / 2
    J = {(i, j): float(Q[i, j] / 2) for i, j in zip(*np.nonzero(np.triu(off, 1)))}
    return h, J
