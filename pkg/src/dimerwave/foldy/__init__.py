"""Foldy-Lax point-dimer simulator and the homogenised volume equation."""

from ._backend import BACKEND, get_kernels
from .core import (
    ConvergenceError,
    DimerCoefficients,
    FoldyState,
    LSOperator,
    LSSolution,
    ProbeGrid,
    SingularSystemError,
    assemble_and_solve_foldy,
    brute_force_field,
    compare_micro_macro,
    ensemble_coefficients,
    lippmann_schwinger_solve,
    macroscopic_medium,
    read_ensemble,
    two_dimer_cluster,
    volume_fraction,
    write_ensemble,
)

__all__ = [
    "BACKEND", "get_kernels", "ConvergenceError", "DimerCoefficients", "FoldyState", "LSOperator",
    "LSSolution", "ProbeGrid", "SingularSystemError", "assemble_and_solve_foldy", "brute_force_field",
    "compare_micro_macro", "ensemble_coefficients", "lippmann_schwinger_solve", "macroscopic_medium",
    "read_ensemble", "two_dimer_cluster", "volume_fraction", "write_ensemble",
]
