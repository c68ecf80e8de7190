from __future__ import annotations

import json

import numpy as np
import pytest

from qorch.errors import CapacityError
from qorch.mps import mps_evolve, mps_run
from qorch.statevector import marginal_probabilities, sv_evolve, sv_run
from qorch.workloads import (GHZ_SIZES, HHL_SIZES, HhlProblem, TfimSpec, build_ghz, build_ham, build_hhl,
                             build_tfim, hhl_benchmark_problem, hhl_postselect, load_hhl_problem,
                             tfim_hamiltonian)

from oracles import distribution, oracle_state, tfim_exact_state, tv_distance

A2 = np.array([[1, -1 / 3], [-1 / 3, 1]])
B2 = np.array([0, 1])


def exact_postselected(c) -> np.ndarray:
    """Solution-register distribution given ancilla = 1, from exact amplitudes."""
    probs = marginal_probabilities(sv_evolve(c), c.measured_qubits)
    half = len(probs) // 2
    kept = probs[half:]
    return kept / kept.sum()


def classical(A, b) -> np.ndarray:
    x = np.linalg.solve(A, b)
    return np.abs(x) ** 2 / np.sum(np.abs(x) ** 2)


class TestGhz:
    def test_structure(self):
        c = build_ghz(4)
        assert c.count_ops() == {"H": 1, "CX": 3}
        assert c.ops[0].kind == "H" and c.ops[0].qubits == (0,)
        assert [op.qubits for op in c.ops[1:]] == [(0, 1), (1, 2), (2, 3)]
        assert c.depth() == 4 and c.measured_qubits == (0, 1, 2, 3)

    @pytest.mark.parametrize("n", [2, 5, 10])
    def test_amplitudes(self, n):
        a = sv_evolve(build_ghz(n)).amplitudes
        expected = np.zeros(1 << n)
        expected[[0, -1]] = 2 ** -0.5
        np.testing.assert_allclose(a, expected, atol=1e-14)

    def test_table_sizes(self):
        for n in GHZ_SIZES:
            c = build_ghz(n)
            assert len(c) == n
        s = mps_evolve(build_ghz(32))
        assert s.bond_dims() == [2] * 31
        with pytest.raises(CapacityError):
            sv_run(build_ghz(32), 10, 0)

    def test_too_small(self):
        with pytest.raises(ValueError):
            build_ghz(1)

    def test_deterministic(self):
        assert build_ghz(9) == build_ghz(9)


class TestHam:
    def test_structure_one_step(self):
        c = build_ham(4, 1)
        counts = c.count_ops()
        assert counts["RX"] == 4 and counts["RZZ"] == 3
        assert counts["H"] == 8

    @pytest.mark.parametrize("steps", [1, 3, 5])
    def test_per_step_count(self, steps):
        counts = build_ham(6, steps).count_ops()
        assert counts["RX"] == 6 * steps and counts["RZZ"] == 5 * steps

    @pytest.mark.parametrize("n, steps", [(4, 0), (1, 1)])
    def test_invalid(self, n, steps):
        with pytest.raises(ValueError):
            build_ham(n, steps)

    def test_sv_vs_mps_distributions(self):
        c = build_ham(6, 3)
        shots = 100_000
        a = distribution(sv_run(c, shots, 1).counts, 6)
        b = distribution(mps_run(c, shots, 2, chi_max=64).counts, 6)
        assert tv_distance(a, b) <= 0.02

    def test_default_steps(self):
        assert build_ham(12).count_ops()["RZZ"] == 11 * 3


class TestTfim:
    def test_no_field_stays_in_zero_state(self):
        counts = sv_run(build_tfim(TfimSpec(5, h=0.0, steps=3)), 500, 0).counts
        assert counts == {"00000": 500}

    @pytest.mark.parametrize("steps", [1, 2, 7])
    @pytest.mark.parametrize("order", [1, 2])
    def test_no_coupling_marginals(self, steps, order):
        h, t = 0.8, 1.3
        c = build_tfim(TfimSpec(4, J=0.0, h=h, t=t, steps=steps, order=order))
        state = sv_evolve(c)
        for q in range(4):
            p1 = marginal_probabilities(state, [q])[1]
            assert p1 == pytest.approx(np.sin(h * t) ** 2, abs=1e-12)

    def test_layout_first_order(self):
        spec = TfimSpec(4, J=0.5, h=0.25, t=2.0, steps=2, order=1)
        c = build_tfim(spec)
        dt = 1.0
        assert [op.kind for op in c.ops] == (["RZZ"] * 3 + ["RX"] * 4) * 2
        assert c.ops[0].params[0] == pytest.approx(2 * 0.5 * dt)
        assert c.ops[3].params[0] == pytest.approx(2 * 0.25 * dt)

    def test_second_order_total_field_angle(self):
        spec = TfimSpec(3, h=0.7, t=1.0, steps=4)
        c = build_tfim(spec)
        per_qubit = sum(op.params[0] for op in c.ops if op.kind == "RX" and op.qubits == (0,))
        assert per_qubit == pytest.approx(2 * 0.7 * 1.0)

    def test_n8_steps4_fidelity(self):
        exact = tfim_exact_state(8, 1.0, 1.0, 1.0)
        psi = sv_evolve(build_tfim(TfimSpec(8, steps=4))).amplitudes
        assert abs(np.vdot(exact, psi)) ** 2 >= 0.99

    @pytest.mark.parametrize("order", [1, 2])
    @pytest.mark.parametrize("boundary", ["open", "periodic"])
    def test_convergence(self, order, boundary):
        exact = tfim_exact_state(6, 1.0, 0.9, 1.0, periodic=boundary == "periodic")
        fids = [abs(np.vdot(exact, sv_evolve(build_tfim(
            TfimSpec(6, h=0.9, steps=s, boundary=boundary, order=order))).amplitudes)) ** 2
            for s in (1, 2, 4, 8)]
        assert fids == sorted(fids)
        assert fids[-1] > 0.97

    def test_dense_hamiltonian_matches_oracle(self):
        import scipy.linalg
        spec = TfimSpec(5, J=0.3, h=1.2, t=0.7, boundary="periodic")
        psi0 = np.zeros(32)
        psi0[0] = 1
        got = scipy.linalg.expm(-1j * spec.t * tfim_hamiltonian(spec)) @ psi0
        np.testing.assert_allclose(got, tfim_exact_state(5, 0.3, 1.2, 0.7, periodic=True), atol=1e-12)

    def test_defaults(self):
        spec = TfimSpec(12)
        assert (spec.J, spec.h, spec.t, spec.steps, spec.boundary) == (1.0, 1.0, 1.0, 3, "open")

    @pytest.mark.parametrize("kwargs", [dict(n=1), dict(n=4, steps=0), dict(n=4, boundary="ring"),
                                        dict(n=4, order=3)])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ValueError):
            TfimSpec(**kwargs)

    def test_mps_matches_oracle(self):
        c = build_tfim(TfimSpec(8, steps=8))
        from qorch.mps import mps_to_statevector
        got = mps_to_statevector(mps_evolve(c, chi_max=64, trunc_threshold=0.0)).amplitudes
        assert abs(np.vdot(oracle_state(c), got)) ** 2 >= 1 - 1e-10


class TestHhl:
    def test_two_by_two_nclock3(self):
        p = HhlProblem.for_system(A2, B2, 3)
        c = build_hhl(p)
        assert c.num_qubits == 5
        np.testing.assert_allclose(classical(A2, B2), [0.1, 0.9], atol=1e-12)
        assert tv_distance(exact_postselected(c), [0.1, 0.9]) <= 0.05

    def test_two_by_two_sampled(self):
        c = build_hhl(HhlProblem.for_system(A2, B2, 4))
        kept, accepted = hhl_postselect(sv_run(c, 200_000, 3).counts)
        got = np.array([kept.get("0", 0), kept.get("1", 0)]) / accepted
        assert tv_distance(got, [0.1, 0.9]) <= 0.05

    @pytest.mark.parametrize("b", [[1, 0], [0.6, 0.8], [1, 1j]])
    def test_identity_system(self, b):
        p = HhlProblem.for_system(np.eye(2), b, 3)
        got = exact_postselected(build_hhl(p))
        np.testing.assert_allclose(got, np.abs(np.asarray(b)) ** 2 / np.sum(np.abs(b) ** 2), atol=1e-10)

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("dim", [2, 4])
    def test_random_well_conditioned(self, dim, seed):
        rng = np.random.default_rng(seed)
        m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        q, _ = np.linalg.qr(m)
        A = q @ np.diag(rng.uniform(1.0, 2.0, dim)) @ q.conj().T
        A = (A + A.conj().T) / 2
        b = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        p = HhlProblem.for_system(A, b, 4)
        assert tv_distance(exact_postselected(build_hhl(p)), classical(A, b / np.linalg.norm(b))) <= 0.05

    def test_table_sizes(self):
        for total in HHL_SIZES:
            p = hhl_benchmark_problem(total)
            assert p.num_qubits == total and p.n_b == p.n_clock == (total - 1) // 2
        for total in (5, 7, 9):
            assert build_hhl(hhl_benchmark_problem(total)).num_qubits == total

    def test_benchmark_accuracy(self):
        for total in (5, 7, 9):
            p = hhl_benchmark_problem(total)
            assert tv_distance(exact_postselected(build_hhl(p)), p.classical_distribution()) <= 0.05

    @pytest.mark.parametrize("total", [4, 1])
    def test_bad_total(self, total):
        with pytest.raises(ValueError):
            hhl_benchmark_problem(total)

    def test_parameters(self):
        p = HhlProblem.for_system(A2, B2, 4)
        grid = p.grid_eigenvalues()
        assert grid.max() == pytest.approx(12.0)
        assert 0 < p.rotation_constant <= grid.min()
        assert np.all(p.eigenvalues * p.evolution_time < 2 * np.pi)

    @pytest.mark.parametrize("A, b", [
        (np.array([[1, 2], [0, 1]]), [1, 0]),
        (np.eye(3), [1, 0, 0]),
        (np.eye(2), [1, 0, 0]),
        (-np.eye(2), [1, 0]),
    ])
    def test_invalid_systems(self, A, b):
        with pytest.raises(ValueError):
            HhlProblem.for_system(A, b, 3)

    def test_unnormalised_b_direct(self):
        with pytest.raises(ValueError, match="normalised"):
            HhlProblem(np.eye(2), np.array([1.0, 1.0]), 3, 1.0, 0.5)

    def test_json_loading(self, tmp_path):
        path = tmp_path / "sys.json"
        path.write_text(json.dumps({"A": [[[1, 0], [-1 / 3, 0]], [[-1 / 3, 0], [1, 0]]],
                                    "b": [[0, 0], [1, 0]], "n_clock": 4}))
        p = load_hhl_problem(path)
        assert p.n_clock == 4
        np.testing.assert_allclose(p.A, A2)
        flat = tmp_path / "flat.json"
        flat.write_text(json.dumps({"A": [[1, 0], [0, 0], [0, 0], [1, 0]], "b": [[1, 0], [0, 0]]}))
        assert load_hhl_problem(flat).n_clock == 1

    def test_postselect(self):
        kept, accepted = hhl_postselect({"10": 3, "11": 5, "00": 9, "01": 1})
        assert kept == {"0": 3, "1": 5} and accepted == 8
