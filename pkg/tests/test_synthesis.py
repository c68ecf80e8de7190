from __future__ import annotations

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from qorch.circuit import Circuit
from qorch.synthesis import (diagonal_ops, state_preparation, synthesize_unitary,
                             uniformly_controlled_rotation)

from oracles import circuit_unitary, oracle_gate, oracle_state


def unitary_of(ops, k: int) -> np.ndarray:
    return circuit_unitary(Circuit(k, tuple(ops)))


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-9) -> bool:
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    phase = a[k] / b[k]
    return abs(abs(phase) - 1) < atol and np.allclose(a, phase * b, atol=atol)


class TestUniformlyControlled:
    @pytest.mark.parametrize("axis", ["Y", "Z"])
    @pytest.mark.parametrize("n_controls", [0, 1, 2, 3])
    def test_block_diagonal_rotations(self, axis, n_controls):
        rng = np.random.default_rng(n_controls)
        angles = rng.uniform(-np.pi, np.pi, 1 << n_controls)
        controls = list(range(n_controls))
        ops = uniformly_controlled_rotation(axis, angles, controls, n_controls)
        u = unitary_of(ops, n_controls + 1)
        expected = np.zeros_like(u)
        for j, a in enumerate(angles):
            expected[2 * j:2 * j + 2, 2 * j:2 * j + 2] = oracle_gate("R" + axis, (a,))
        np.testing.assert_allclose(u, expected, atol=1e-12)

    def test_wrong_angle_count(self):
        with pytest.raises(ValueError):
            uniformly_controlled_rotation("Y", [0.1, 0.2, 0.3], [0], 1)


class TestDiagonal:
    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_diagonal_up_to_dropped_phase(self, k):
        phases = np.random.default_rng(k).uniform(-np.pi, np.pi, 1 << k)
        ops, g = diagonal_ops(phases, list(range(k)))
        u = unitary_of(ops, k)
        np.testing.assert_allclose(u * np.exp(1j * g), np.diag(np.exp(1j * phases)), atol=1e-12)


class TestStatePreparation:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_random_vectors(self, k, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=1 << k) + 1j * rng.normal(size=1 << k)
        psi = oracle_state(Circuit(k, tuple(state_preparation(v, list(range(k))))))
        assert abs(np.vdot(psi, v / np.linalg.norm(v))) == pytest.approx(1.0, abs=1e-10)

    def test_sparse_real_vector(self):
        v = np.array([0, 0, 0, 1, 0, 0, 0, 0])
        psi = oracle_state(Circuit(3, tuple(state_preparation(v, [0, 1, 2]))))
        assert abs(psi[3]) == pytest.approx(1.0, abs=1e-12)

    def test_zero_vector(self):
        with pytest.raises(ValueError):
            state_preparation([0, 0], [0])


class TestUnitarySynthesis:
    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("seed", range(3))
    def test_haar_random(self, k, seed):
        u = scipy.stats.unitary_group.rvs(1 << k, random_state=seed)
        assert equal_up_to_phase(unitary_of(synthesize_unitary(u, list(range(k))), k), u)

    def test_real_orthogonal(self):
        u = scipy.stats.ortho_group.rvs(4, random_state=1).astype(complex)
        assert equal_up_to_phase(unitary_of(synthesize_unitary(u, [0, 1]), 2), u)

    def test_identity_is_cheap(self):
        assert synthesize_unitary(np.eye(2), [0]) == []

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            synthesize_unitary(np.eye(4), [0])
