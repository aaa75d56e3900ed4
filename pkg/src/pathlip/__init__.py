"""Numerical checks of Lipschitz estimates for path-dependent Hamilton-Jacobi equations.

Modules
-------
paths            grid paths on [-h, T], stopping, norms, sampling
ci               finite-difference coinvariant derivatives and Dini quotients
lk               Lyapunov-Krasovskii functionals, weights a(t), explicit constants
hamiltonian      Bellman Hamiltonians, benchmarks, structural-constant estimates
solver           value functionals by piecewise-constant control search
characteristics  minimax identity, characteristic search, comparison triples
verify           Lipschitz, time-Lipschitz and criterion verifiers
"""
__version__ = "0.1.0"

from .paths import Horizon, SampledPath, make_path, stop, sup_norm, special_seminorm
from .ci import Functional, ci_derivatives_fd, dini_directional, check_nonanticipative
from .lk import LKContext, lipschitz_constants, lambda_phi_time
from .hamiltonian import BellmanHamiltonian, BoundaryFunctional, make_benchmark
from .solver import SolverParams, value_functional

__all__ = [
    "Horizon", "SampledPath", "make_path", "stop", "sup_norm", "special_seminorm",
    "Functional", "ci_derivatives_fd", "dini_directional", "check_nonanticipative",
    "LKContext", "lipschitz_constants", "lambda_phi_time",
    "BellmanHamiltonian", "BoundaryFunctional", "make_benchmark",
    "SolverParams", "value_functional",
]
