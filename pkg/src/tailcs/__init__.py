"""Sparse recovery by tail minimization with proximal Hadamard-product solvers."""
from .analysis import (BoundReport, RipEstimate, bound_thm_2_2, bound_thm_2_4, bound_thm_2_8,
                       rate_estimate, rip_exact, rip_monte_carlo)
from .baselines import (BaselineConfig, cosamp, hpp, htp, omp, sp, tail_hpp, tail_l1_constrained,
                        tail_lasso_oracle)
from .objective import (FactorPair, KktReport, TailProblem, f_value, g_gradient, g_hessian,
                        g_value, kkt_report, split_z)
from .phpp import (PhppConfig, SolverTrace, hard_threshold_support, phpp_update_u, phpp_update_v,
                   restricted_update_u, restricted_update_v, solve_phpp, solve_phpp_improved)
from .problem_gen import (NoiseModel, ProblemInstance, SparseSignal, assemble_instance,
                          gen_gaussian_matrix, gen_noise, gen_partial_dct, gen_sparse_signal,
                          make_instance)

__version__ = "0.1.0"
