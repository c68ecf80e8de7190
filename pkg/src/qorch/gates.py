"""Gate matrices for the IR gate set.

Two-qubit matrices use big-endian ordering: the first listed qubit is the
high bit of the 4x4 row/column index, so ``CX(a, b)`` has control ``a``.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

ONE_QUBIT = frozenset({"H", "X", "Y", "Z", "S", "Sdg", "T", "Tdg", "RX", "RY", "RZ"})
TWO_QUBIT = frozenset({"CX", "CZ", "RZZ", "SWAP", "CRY", "CP"})
PARAMETRIC = frozenset({"RX", "RY", "RZ", "RZZ", "CRY", "CP"})
DIAGONAL = frozenset({"Z", "S", "Sdg", "T", "Tdg", "RZ", "CZ", "RZZ", "CP"})
GATE_KINDS = ONE_QUBIT | TWO_QUBIT

_SQ2 = 1 / math.sqrt(2)

_FIXED = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "Sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "T": np.array([[1, 0], [0, cmath.exp(1j * math.pi / 4)]], dtype=complex),
    "Tdg": np.array([[1, 0], [0, cmath.exp(-1j * math.pi / 4)]], dtype=complex),
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
for _m in _FIXED.values():
    _m.setflags(write=False)

_SELF_INVERSE = frozenset({"H", "X", "Y", "Z", "CX", "CZ", "SWAP"})
_DAGGER = {"S": "Sdg", "Sdg": "S", "T": "Tdg", "Tdg": "T"}


def rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([cmath.exp(-0.5j * theta), cmath.exp(0.5j * theta)])


def rzz(theta: float) -> np.ndarray:
    a, b = cmath.exp(-0.5j * theta), cmath.exp(0.5j * theta)
    return np.diag([a, b, b, a])


def cry(theta: float) -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[2:, 2:] = ry(theta)
    return m


def cp(lam: float) -> np.ndarray:
    return np.diag([1, 1, 1, cmath.exp(1j * lam)])


_ROTATIONS = {"RX": rx, "RY": ry, "RZ": rz, "RZZ": rzz, "CRY": cry, "CP": cp}


def gate_matrix(kind: str, params: tuple[float, ...] | list[float] = ()) -> np.ndarray:
    """Unitary of a gate kind (2x2 or 4x4)."""
    if kind in _FIXED:
        return _FIXED[kind]
    try:
        return _ROTATIONS[kind](float(params[0]))
    except KeyError:
        raise ValueError(f"unknown gate kind {kind!r}") from None


def diagonal(kind: str, params: tuple[float, ...] | list[float] = ()) -> np.ndarray:
    """Diagonal entries of a diagonal gate; cheaper than ``gate_matrix`` for phase updates."""
    return np.diagonal(gate_matrix(kind, params)).copy()


def inverse_kind(kind: str, params: tuple[float, ...]) -> tuple[str, tuple[float, ...]]:
    if kind in _SELF_INVERSE:
        return kind, ()
    if kind in _DAGGER:
        return _DAGGER[kind], ()
    if kind in PARAMETRIC:
        return kind, (-params[0],)
    raise ValueError(f"unknown gate kind {kind!r}")
