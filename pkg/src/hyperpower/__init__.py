"""Hyper-power (Schulz) preconditioner sequences for Kronecker-structured Stokes systems."""

from .krylov import SolveStats, lanczos_extremes, minres
from .linop import LinearOperator, materialize
from .precond import (CostModel, KRONECKER_COUNT_MODEL, build_sequence_Q_exact, build_sequence_Q_fixed,
                      build_sequence_Q_hat, build_sequence_V, cost_estimate, hyperpower_step, make_PQ0,
                      make_PV0, neumann_apply, preconditioner_sequence)
from .spectral import SpectrumReport, generalized_spectrum, lambda_map, predict_next, verify_theory
from .spline import UnivariateBasis, make_basis, univariate_matrices
from .stokes import StokesSystem, assemble_stokes, build_space
from .tensorkron import FastDiagSolver, GeneralizedKronSum, KroneckerOp, fastdiag_build

__version__ = "0.1.0"
