"""Global minimum Value-at-Risk for scenario portfolio models.

The pipeline: a CVaR LP warm start, piece-restriction upper bounds,
sign-hypothesis and McCormick relaxation lower bounds with disjunctive
cuts, branch-and-cut certification of global optimality, and a smoothed
local solver.
"""

from .branchcut import (Certificate, NodeState, export_tree, fixing_round,
                        node_lp, solve_global, verify_global)
from .cvar import (CvarSolution, Infeasible, cvar_of, minimize_cvar,
                   mbeta_interval, var_of)
from .instances import (BadProbabilities, Instance, ParseError, Polytope,
                        UnboundedPolytope, ValidationReport, example_instance,
                        load, random_instance, save, validate)
from .lp import (LpModel, LpSolution, NumericalFailure, dump_lp, solve_lp,
                 solve_lp_with)
from .lpec import (AmbiguousClassification, IndexClassification, LpecPoint,
                   classify, min_var_exists_check, recover_multipliers,
                   residuals)
from .lower import (CutSpec, HullBounds, MissingAbsBound, RelaxKind,
                    corollary_bound, cut_lp_value, cut_sweep, hull_bounds,
                    hull_relax_model, sweep_to_csv, z_relax_model)
from .smoothing import (DegenerateCurvature, SmoothKind, SmoothResult, rho,
                        rho_prime, rho_second, smooth_minimize, smoothed_var,
                        smoothed_var_grad)
from .upper import (PieceSpec, TooLarge, UpperBoundTrace, enumerate_pieces,
                    improve, restricted_lp)

__version__ = "0.1.0"
