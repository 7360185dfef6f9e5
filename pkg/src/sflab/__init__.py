"""Spectral shift functions, spectral flow and index computations for paths
of symmetric matrices and their Dirac-type discretizations."""

from .matlin import SymOp, eig_sym
from .oppath import OperatorPath, SCENARIOS, load_scenario
from .ssf import StepFunction, xi_counting, xi_from_det
from .flow import spectral_flow, fredholm_pair_index, morse_chain_report

__version__ = "0.1.0"

__all__ = [
    "OperatorPath", "SCENARIOS", "StepFunction", "SymOp", "eig_sym", "fredholm_pair_index",
    "load_scenario", "morse_chain_report", "spectral_flow", "xi_counting", "xi_from_det",
]
