"""Solve random QUBOs with QAOA and with the distributed decomposition.

    python demos/qaoa_and_dqaoa.py
"""

from __future__ import annotations

from qorch.execution import BackendSelector
from qorch.variational import (DqaoaConfig, LocalExecutor, OptimizerSpec, QaoaParams, brute_force,
                               dqaoa_solve, qaoa_solve, random_qubo)

q = random_qubo(8, seed=1)
_, best, worst = brute_force(q)
sol = qaoa_solve(q, QaoaParams(p=2, optimizer=OptimizerSpec(seed=1)))
print(f"QAOA N=8: cost {sol.cost:.3f} (optimum {best:.3f}, worst {worst:.3f}), "
      f"fidelity {sol.fidelity:.3f}, {sol.evals} evaluations")

# Twenty variables, four 6-variable sub-problems per iteration, four at a time.
big = random_qubo(20, seed=2)
cfg = DqaoaConfig(subqsize=6, nsubq=4, max_iters=8, concurrency=4, seed=2)
executor = LocalExecutor()
res = dqaoa_solve(big, cfg, QaoaParams(p=1, optimizer=OptimizerSpec(max_evals=30)), executor,
                  BackendSelector("sv", "", {"delay_ms": "5"}))
for row in res.iteration_log:
    print(f"  iter {row['iteration']}: cost {row['cost']:.3f}, accepted {row['accepted']}, "
          f"peak jobs in flight {row['jobs_in_flight']}")
print(f"DQAOA N=20: cost {res.cost:.3f}, fidelity {res.fidelity:.3f}")
