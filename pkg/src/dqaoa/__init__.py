"""Distributed QAOA for large QUBO problems at desk scale."""

from dqaoa.decomposition import DecompositionConfig, Strategy, SubQubo, aggregate, decompose, impact_analysis
from dqaoa.orchestrator import CycleReport, DqaoaConfig, DqaoaResult, check_convergence, run_dqaoa
from dqaoa.qaoa import QaoaConfig, QaoaParams, QaoaResult, solve_subqubo
from dqaoa.qubo import (
    QuboProblem,
    brute_force_solve,
    generate_dense_qubo,
    generate_maxcut,
    qubo_energy,
    simulated_annealing_solve,
)

__version__ = "0.1.0"
