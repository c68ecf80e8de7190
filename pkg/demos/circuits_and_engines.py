"""Parse a circuit, run it on both simulators and look at MPS bond growth.

    python demos/circuits_and_engines.py
"""

from __future__ import annotations

import numpy as np

from qorch.circuit import parse_circuit_text, serialize_circuit
from qorch.mps import mps_evolve, mps_run, mps_to_statevector
from qorch.statevector import sv_evolve, sv_run
from qorch.workloads import TfimSpec, build_ghz, build_tfim

BELL = """
OPENQASM 2.0;
include "qelib1.inc";
qreg q[2];
h q[0];
cx q[0],q[1];
rz(pi/4) q[1];
measure q;
"""

c = parse_circuit_text(BELL)
print("parsed:", c.count_ops(), "depth", c.depth())
print(serialize_circuit(c))
print("sv counts :", sv_run(c, 1000, seed=1).counts)
print("mps counts:", mps_run(c, 1000, seed=1).counts)

# GHZ needs bond dimension 2 no matter how wide it gets.
for n in (8, 32, 64):
    print(f"GHZ-{n} bonds:", set(mps_evolve(build_ghz(n)).bond_dims()))

# A TFIM quench entangles more; truncation trades accuracy for bond size.
tfim = build_tfim(TfimSpec(12, steps=4))
exact = sv_evolve(tfim).amplitudes
for chi in (2, 4, 8, 64):
    s = mps_evolve(tfim, chi_max=chi)
    fid = abs(np.vdot(exact, mps_to_statevector(s).amplitudes)) ** 2
    print(f"chi_max={chi:>2}: max bond {s.max_bond():>2}, fidelity {fid:.6f}, "
          f"discarded weight {s.cumulative_trunc_error:.2e}")
