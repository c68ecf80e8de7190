from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qorch.circuit import Circuit, GateOp
from qorch.errors import CapacityError, CircuitError
from qorch.mps import (mps_apply, mps_evolve, mps_init, mps_run, mps_sample, mps_to_statevector)
from qorch.statevector import sv_evolve, sv_run
from qorch.workloads import TfimSpec, build_ghz, build_tfim

from oracles import distribution, layered_circuit, overlap, random_circuit, tv_distance

EXACT = dict(chi_max=1 << 20, trunc_threshold=0.0)


def check_structure(state) -> None:
    t = state.tensors
    assert t[0].shape[0] == 1 and t[-1].shape[2] == 1
    for a, b in zip(t, t[1:]):
        assert a.shape[2] == b.shape[0]
    assert state.max_bond() <= state.chi_max


class TestInit:
    def test_product_tensors(self):
        s = mps_init(4)
        assert [t.shape for t in s.tensors] == [(1, 2, 1)] * 4
        for t in s.tensors:
            np.testing.assert_array_equal(t.reshape(2), [1, 0])

    def test_chi_one_is_product_state_simulator(self):
        s = mps_init(3, chi_max=1)
        for op in [GateOp("H", (0,)), GateOp("RY", (1,), (0.3,)), GateOp("CZ", (0, 1))]:
            mps_apply(s, op)
        assert s.bond_dims() == [1, 1]

    def test_fifty_qubits_linear_memory(self):
        s = mps_init(50, chi_max=16)
        assert sum(t.size for t in s.tensors) == 100

    def test_invalid(self):
        with pytest.raises(ValueError):
            mps_init(0)
        with pytest.raises(ValueError):
            mps_init(2, chi_max=0)


class TestApply:
    def test_single_qubit_keeps_bonds(self):
        s = mps_apply(mps_init(2), GateOp("H", (0,)))
        assert s.bond_dims() == [1]

    def test_bell_bond_two(self):
        s = mps_init(2)
        mps_apply(s, GateOp("H", (0,)))
        mps_apply(s, GateOp("CX", (0, 1)))
        assert s.bond_dims() == [2]
        np.testing.assert_allclose(mps_to_statevector(s).amplitudes, [2 ** -0.5, 0, 0, 2 ** -0.5], atol=1e-12)

    @pytest.mark.parametrize("n", [2, 8, 17, 32, 64])
    def test_ghz_bonds_exactly_two(self, n):
        s = mps_evolve(build_ghz(n))
        assert s.bond_dims() == [2] * (n - 1)

    def test_ghz8_overlap_with_sv(self):
        c = build_ghz(8)
        assert overlap(mps_to_statevector(mps_evolve(c)).amplitudes, sv_evolve(c).amplitudes) >= 1 - 1e-10

    def test_non_adjacent_and_reversed_gates(self):
        c = Circuit(5, (GateOp("H", (4,)), GateOp("CX", (4, 0)), GateOp("CRY", (1, 3), (0.7,)),
                        GateOp("SWAP", (0, 3)), GateOp("CP", (3, 1), (1.1,))), tuple(range(5)))
        got = mps_to_statevector(mps_evolve(c, **EXACT)).amplitudes
        assert overlap(got, sv_evolve(c).amplitudes) >= 1 - 1e-12

    def test_index_out_of_range(self):
        with pytest.raises(CircuitError):
            mps_apply(mps_init(2), GateOp("CX", (0, 2)))

    def test_bond_cap_and_error_monotone_every_op(self):
        c = layered_circuit(np.random.default_rng(3), 10, 12)
        s = mps_init(10, chi_max=4)
        last = 0.0
        for op in c.ops:
            mps_apply(s, op)
            check_structure(s)
            assert s.cumulative_trunc_error >= last
            assert s.norm() == pytest.approx(1.0, abs=1e-8)
            last = s.cumulative_trunc_error
        assert last > 0

    def test_threshold_drops_small_values(self):
        c = Circuit(2, (GateOp("RY", (0,), (1e-7,)), GateOp("CX", (0, 1))), (0, 1))
        assert mps_evolve(c, chi_max=4, trunc_threshold=1e-3).bond_dims() == [1]
        assert mps_evolve(c, chi_max=4, trunc_threshold=0.0).bond_dims() == [2]


class TestExactness:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 80), st.integers(0, 2**32 - 1))
    def test_untruncated_matches_sv(self, n, n_ops, seed):
        c = random_circuit(np.random.default_rng(seed), n, n_ops)
        s = mps_evolve(c, chi_max=1 << (n // 2), trunc_threshold=0.0)
        assert s.cumulative_trunc_error <= 1e-12
        assert overlap(mps_to_statevector(s).amplitudes, sv_evolve(c).amplitudes) >= 1 - 1e-10

    @pytest.mark.parametrize("seed", range(4))
    def test_six_qubit_elementwise_up_to_phase(self, seed):
        c = random_circuit(np.random.default_rng(seed), 6, 60)
        a = mps_to_statevector(mps_evolve(c, **EXACT)).amplitudes
        b = sv_evolve(c).amplitudes
        k = int(np.argmax(np.abs(b)))
        phase = a[k] / b[k]
        np.testing.assert_allclose(a, phase * b, atol=1e-9)

    def test_densify_cap(self):
        with pytest.raises(CapacityError):
            mps_to_statevector(mps_init(21))


class TestSampling:
    def test_ghz6(self):
        counts = mps_sample(mps_evolve(build_ghz(6)), range(6), 2000, 1)
        assert set(counts) <= {"000000", "111111"}
        assert sum(counts.values()) == 2000

    def test_product_state(self):
        c = Circuit(4, (GateOp("X", (1,)), GateOp("X", (3,))), tuple(range(4)))
        assert mps_run(c, 300, 0).counts == {"0101": 300}

    def test_seed_deterministic(self):
        s = mps_evolve(layered_circuit(np.random.default_rng(0), 6, 4), **EXACT)
        assert mps_sample(s, range(6), 5000, 9) == mps_sample(s, range(6), 5000, 9)

    def test_shallow_8q_tv_against_sv(self):
        c = layered_circuit(np.random.default_rng(12), 8, 4)
        shots = 100_000
        a = distribution(mps_run(c, shots, 1, chi_max=256).counts, 8)
        b = distribution(sv_run(c, shots, 2).counts, 8)
        assert tv_distance(a, b) <= 0.02

    def test_partial_measurement_matches_sv_marginal(self):
        c = layered_circuit(np.random.default_rng(5), 5, 5)
        c = Circuit(5, c.ops, (3, 0))
        shots = 100_000
        a = distribution(mps_run(c, shots, 1, **EXACT).counts, 2)
        b = distribution(sv_run(c, shots, 1).counts, 2)
        assert tv_distance(a, b) <= 0.01

    def test_sampling_does_not_change_state(self):
        s = mps_evolve(build_tfim(TfimSpec(6)))
        before = mps_to_statevector(s).amplitudes
        mps_sample(s, range(6), 100, 0)
        assert overlap(mps_to_statevector(s).amplitudes, before) == pytest.approx(1.0, abs=1e-12)

    def test_shots_must_be_positive(self):
        with pytest.raises(ValueError):
            mps_sample(mps_init(2), [0], 0, 0)

    def test_stop_hook(self):
        class Stop(Exception):
            pass

        def hook():
            raise Stop

        with pytest.raises(Stop):
            mps_run(build_ghz(3), 10, 0, should_stop=hook)
