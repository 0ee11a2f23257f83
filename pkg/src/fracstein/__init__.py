"""Fractional Sobolev path embeddings and quantitative normal approximation."""
from .fractional import (
    BasisSpec,
    FracOrder,
    GridFunction,
    basis_e,
    basis_h,
    frac_integral_left,
    frac_integral_right,
    gamma_fn,
    hs_norm,
    hyp2f1,
    inner_product,
    uniform_grid,
)
from .hilbert import (
    CovOperator,
    EmbeddedVector,
    HilbertSchmidtFamily,
    covariance_matrix,
    embed_piecewise_linear,
    embed_step_path,
    family_donsker,
    family_h1,
    family_interp,
    partial_trace,
    sample_gaussian,
    tensor,
    trace,
    trace_norm,
)
from .processes import (
    kernel_KH,
    sample_bm_series,
    sample_donsker,
    sample_fbm,
    sample_interp_bm,
    sample_poisson,
)
from .stein import BoundReport, bound_donsker, bound_fbm, bound_interp, bound_poisson, trace_gap_interp
from .verify import (
    MCEstimate,
    RateSeries,
    char_gap_poisson,
    empirical_covariance,
    rate_fit,
    third_cumulant_poisson,
)

__version__ = "0.1.0"
