"""Symbolic SG pseudo-differential calculus and half-space boundary problem checks."""

from . import expr
from .boundary import (assemble_Ptilde, assemble_system, boundary_symbol, left_elliptic_check, poisson_apply,
                       transmission_apply)
from .bvp import ModelProblem, RegularityReport, load_problem, solve_halfline, solve_halfplane_ct, verify_regularity
from .calculus import DiffSymbol, FormalSum, adjoint, compose, gevrey_cutoff, parametrix, remainder_order
from .ellipticity import (BoundaryRow, BVProblem, ls_check, ls_matrix, properly_elliptic_check, root_bound,
                          roots_in_normal, sg_elliptic_check)
from .errors import SGCalcError
from .expr import diff, evaluate, parse, to_prefix
from .extension import (BoundaryJet, ExtensionParams, decay_fit, dzanasija_a, dzanasija_b, extend_half_space,
                        seminorm_fit)
from .gridfunc import GridFunction
from .seminorm import GevreyIndices, SGOrder, sg_seminorm_estimate

__version__ = "0.1.0"
