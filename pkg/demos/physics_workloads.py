"""Trotter convergence for the transverse-field Ising chain and a small HHL solve.

    python demos/physics_workloads.py
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from qorch.statevector import sv_evolve, sv_run
from qorch.workloads import HhlProblem, TfimSpec, build_hhl, build_tfim, hhl_postselect, tfim_hamiltonian

spec = TfimSpec(8)
psi0 = np.zeros(1 << spec.n)
psi0[0] = 1
exact = scipy.linalg.expm(-1j * spec.t * tfim_hamiltonian(spec)) @ psi0
for order in (1, 2):
    fids = []
    for steps in (1, 2, 4, 8):
        psi = sv_evolve(build_tfim(TfimSpec(8, steps=steps, order=order))).amplitudes
        fids.append(abs(np.vdot(exact, psi)) ** 2)
    print(f"order {order} Trotter fidelity at 1/2/4/8 steps:", " ".join(f"{f:.5f}" for f in fids))

A = np.array([[1, -1 / 3], [-1 / 3, 1]])
b = np.array([0.0, 1.0])
problem = HhlProblem.for_system(A, b, n_clock=4)
kept, accepted = hhl_postselect(sv_run(build_hhl(problem), 100_000, seed=3).counts)
x = np.linalg.solve(A, b)
print("HHL post-selected:", {k: round(v / accepted, 4) for k, v in sorted(kept.items())},
      f"({accepted} accepted shots)")
print("classical |x|^2  :", np.round(np.abs(x) ** 2 / np.sum(np.abs(x) ** 2), 4))
