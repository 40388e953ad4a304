"""hpstep: a hierarchical Poincare-Steklov direct elliptic solver coupled
with IMEX Runge-Kutta time stepping for parabolic problems in 1D/2D."""

from .chebyshev import ChebGrid1D, cheb_nodes, diff_matrix, interpolate, laplacian_2d
from .errors import (ConfigError, DivergenceError, HpstepError,
                     SingularMatrixError, UnsupportedConfigurationError)
from .gridfn import GridFunction
from .linalg import DenseFactorization, eig_general, factor_solve
from .operators import (EllipticDiscretization, GlobalSparse, LeafStencil,
                        OperatorCoefficients, assemble_global, leaf_matrix,
                        shift_reaction)
from .problems import ProblemSpec, builtin_problems, get_problem
from .solver import HpsOperatorSet, build, build_leaf, merge
from .stability import StepMapSpectrum, analyze, assemble_step_map
from .tableaux import ButcherPair, available_tableaux, load_tableau
from .timestep import (ParabolicProblem, StepperState, TimeStepper,
                       evaluate_nonlinear, scalar_stability_function)
from .tree import DomainTree, TreeNode, build_tree

__version__ = "0.1.0"

__all__ = [
    "ChebGrid1D", "cheb_nodes", "diff_matrix", "interpolate", "laplacian_2d",
    "ConfigError", "DivergenceError", "HpstepError", "SingularMatrixError",
    "UnsupportedConfigurationError", "GridFunction", "DenseFactorization",
    "eig_general", "factor_solve", "EllipticDiscretization", "GlobalSparse",
    "LeafStencil", "OperatorCoefficients", "assemble_global", "leaf_matrix",
    "shift_reaction", "ProblemSpec", "builtin_problems", "get_problem",
    "HpsOperatorSet", "build", "build_leaf", "merge", "StepMapSpectrum",
    "analyze", "assemble_step_map", "ButcherPair", "available_tableaux",
    "load_tableau", "ParabolicProblem", "StepperState", "TimeStepper",
    "evaluate_nonlinear", "scalar_stability_function", "DomainTree",
    "TreeNode", "build_tree",
]
