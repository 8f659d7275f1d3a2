"""Two-precision iterative refinement for overdetermined least squares."""

from .precision import (DOUBLE_DOUBLE, DOUBLE_SINGLE, EXTENDED_DOUBLE,
                        ExtendedScalar, FloatFormat, PrecisionPair,
                        compensated_dot, residual_matvec, round_to_working)
from .densela import (AugmentedSolveResult, NoConvergenceError, QrFactors,
                      RankDeficientError, SingularTriangularError, apply_q,
                      apply_qt, materialize_q1, qr_factor, solve_augmented_qr,
                      svd_of_r, tri_solve)
from .probgen import (LsProblem, OracleDivergenceError, derive_seed,
                      gen_randsvd, gen_rhs, generate, truth_oracle)
from .predict import (ConditionReport, aug_r_convergence, aug_x_convergence,
                      cost_model, csne_one_step, evaluate_conditions,
                      kappa_augmented, ls_recognition, sn_convergence,
                      sn_limiting, sn_recognition)
from .krylov import (KrylovConfig, Precondition, Side, SketchPreconditioner,
                     build_sketch_preconditioner, gmres_augmented, lsqr)
from .refine import (DirectQr, IterationEntry, Krylov, RefinementTrace,
                     RefinerConfig, Status, refine_augmented, refine_combined,
                     refine_ls, refine_semi_normal, run_driver, scale_alpha,
                     tolerance)
from .harness import (ExperimentSpec, GridResult, emit_csv, emit_trace,
                      run_grid)

__version__ = "0.1.0"
