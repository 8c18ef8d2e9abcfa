"""Numerical toolkit for Levy-type jump operators.

Periodic spectral grids with dyadic Littlewood-Paley analysis, jump-kernel
models with assumption validation, symbol computation and parametrix
resolvents, an implicit Cauchy solver, and a thinning-based jump-process
simulator with statistical verification reports.
"""

__version__ = "0.1.0"

from .grids import (TorusGrid, GridFunction, DyadicPartition, grid_function,
                    build_dyadic_partition, holder_zygmund_norm, tail_decay_check,
                    to_spectrum, from_spectrum)
from .kernels import (KernelSpec, Coefficient, ValidationReport, eval_kernel,
                      validate_assumptions, stable_like, fullspace_diagnostic,
                      constant_coefficient, trig_coefficient, holder_coefficient)
from .symbols import (SymbolField, SectorReport, ComputationError, compute_symbol,
                      symbol_class_norm, sector_and_ellipticity, resolvent_symbol,
                      parametrix_decay_scan, multiplier_symbol)
from .operators import (apply_xform, apply_yform, apply_L_direct, LDirectPlan,
                        schwartz_kernel_sum, SchwartzKernelTable,
                        remainder_operator_apply)
from .resolvent import (ResolventOperator, SolveInfo, DivergenceError,
                        solve_resolvent, positivity_of_resolvent,
                        generator_bound_scan, GeneratorReport)
from .probes import probe_basket
from .cauchy import (CauchyProblem, Trajectory, solve_cauchy, solve_backward,
                     regularity_report)
from .jumps import (SimScheme, PathEnsemble, build_scheme, simulate_paths,
                    observable_tables, martingale_residual, MartingaleReport,
                    one_dim_law_compare, scheme_bias_allowance, mc_vs_pde,
                    path_diagnostics, step_path, d_uc, gamma_modulus, seed_ladder)
from .config import ExperimentConfig, ConfigError, load_config
from .cli import run_experiment
