"""Nonlocal extremal operators with stable-plus-lower-order kernels.

Modules: ``kernel_model`` (φ, kernel classes), ``quadrature`` (lattice Lévy
sums), ``extremal_ops`` (M±, M_i±, M̃±), ``barriers`` (special barrier and
bump), ``solver`` (monotone Dirichlet solver), ``regularity_lab``
(Hölder/Harnack measurements) and ``cli``.
"""

from .errors import PucciError
from .extremal_ops import OperatorKind, eval_operator
from .grid import Exterior, GridFunction
from .kernel_model import KernelFunction, KernelSpec, ScalingFunction
from .solver import DirichletProblem, DirichletSolver, SolverConfig, solve

__all__ = ["PucciError", "OperatorKind", "eval_operator", "Exterior", "GridFunction",
           "KernelFunction", "KernelSpec", "ScalingFunction", "DirichletProblem",
           "DirichletSolver", "SolverConfig", "solve"]
__version__ = "0.1.0"
