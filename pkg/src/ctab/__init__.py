"""Analysis and simulation of multi-way contingency tables."""

from .lp import InfeasibleError
from .table import (
    ContingencyTable,
    DegenerateStratumError,
    InconsistentMarginalsError,
    MarginalSet,
    TableShape,
    collapse_pair,
    condition,
    flatten_index,
    load_table,
    marginal,
    unflatten_index,
)
from .measures import (
    UndefinedMeasureError,
    gamma,
    ld_conditional,
    ld_pair,
    pearson_phi,
    pearson_rho_scored,
    somers_d,
)
from .simpson import decompose, relative_difference
from .polytope import (
    AffineParametrization,
    build_constraints,
    cell_bounds,
    fixed_cells,
    free_count,
    parametrize_table,
    refine,
)
from .threeway import bartlett_D, bennett_L, taylor_D, threeway_measures
from .maxent import chi_square_gof, max_entropy
from .homogeneity import equal_rho_2x2xK, equal_rho_subset_ml, zero_partial_fit
from .simulate import (
    NoTableError,
    common_rho_interval,
    gamma_construct,
    inversion_sample,
    nonlinear_assoc_bounds,
    pearson_bounds,
    pearson_construct,
    rho_bridge_for_d,
    somers_construct,
)

__version__ = "0.1.0"
