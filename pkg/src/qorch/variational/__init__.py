"""QUBO modelling, QAOA and distributed QAOA."""

from .dqaoa import DqaoaConfig, dqaoa_solve, random_subsets
from .executor import Executor, LocalExecutor
from .qaoa import (OptimizationFailed, OptimizerSpec, QaoaParams, SolutionRecord, build_qaoa_circuit,
                   qaoa_solve)
from .qubo import (QuboProblem, brute_force, extract_subqubo, fidelity, ising_terms, qubo_cost,
                   random_qubo)

__all__ = [
    "DqaoaConfig", "Executor", "LocalExecutor", "OptimizationFailed", "OptimizerSpec", "QaoaParams",
    "QuboProblem", "SolutionRecord", "brute_force", "build_qaoa_circuit", "dqaoa_solve",
    "extract_subqubo", "fidelity", "ising_terms", "qaoa_solve", "qubo_cost", "random_qubo",
    "random_subsets",
]
