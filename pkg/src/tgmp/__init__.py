"""Tensor-compressed GMP behavioral models for power amplifiers."""

from ._kernels import backend
from .design import DesignSet, build_design, build_full_design, load_design, save_design
from .metrics import EvalReport, compare_models, nmse, sparsity
from .models import (
    CpModel,
    GmpModel,
    TtModel,
    TuckerModel,
    expand_to_gmp,
    flop_count,
    load_model,
    param_count,
    predict,
    save_model,
    simulate,
)
from .rsthosvd import ProjectionPair, project_modes_23, randomized_sthosvd
from .signals import OfdmConfig, ReferencePa, ofdm_generate, qam16_map, reference_pa_apply
from .solvers import (
    FitReport,
    SolverConfig,
    als_cp,
    als_tt,
    als_tucker,
    check_projection_bound,
    fista_lasso,
    pgd_lasso,
    ridge_ls,
    rp_als,
)

__version__ = "0.1.0"
