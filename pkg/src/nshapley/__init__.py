"""Exact order-n interaction attributions for low-dimensional models.

The package computes, for a prediction function and a choice of value
function, the full family of n-Shapley values: per-coalition
attributions that interpolate between classic per-feature Shapley
values (n = 1) and the complete functional decomposition of the model
at the explained point (n = d, the Shapley-GAM). Everything is exact
up to float64 roundoff; combinatorial coefficients are formed in
rational arithmetic.

Dimensions are capped at 24 and practical up to roughly 16; the hot
transforms are numba-compiled with a pure-numpy fallback (set
``NSHAPLEY_DISABLE_NUMBA=1`` to force the fallback).
"""

from ._kernels import using_numba
from .analysis import DegreeReport, DependenceSeries, interaction_degree, partial_dependence
from .core import (
    InteractionIndex,
    RecoveryReport,
    ShapleyGam,
    classic_shapley_oracle,
    delta,
    delta_all,
    n_shapley_all_orders,
    n_shapley_explicit,
    n_shapley_from_gam,
    n_shapley_recursive,
    recovery_check,
    reduce_order,
    shapley_gam,
)
from .exactnum import (
    CoefficientTable,
    Rational,
    bernoulli,
    check_bernoulli_identity,
    check_bernoulli_orthogonality,
    coeff_c,
)
from .lattice import (
    FeatureSet,
    SubsetTable,
    enumerate_subsets,
    moebius_transform,
    zeta_transform,
)
from .models import (
    AdditiveModel,
    CheckerboardSpec,
    ComponentMap,
    ConstantComponent,
    ExternalModel,
    KnnModel,
    LookupComponent,
    PolyFactor,
    PredictFn,
    ProcessFailed,
    ProductComponent,
    ProtocolTimeout,
    SineFactor,
    StepFactor,
    additive_model,
    cell_center_grid,
    checkerboard,
    external_model,
    fit_additive_marginal_means,
    knn_model,
)
from .valuefn import (
    GamInducedValueFunction,
    InterventionalValueFunction,
    NoMatchingRows,
    ObservationalExactMatchValueFunction,
    ValueFunction,
    ValueTable,
    build_value_table,
    gam_induced_value,
    interventional_value,
    observational_exactmatch_value,
)

__version__ = "0.1.0"

__all__ = [
    "using_numba",
    "__version__",
    # exact coefficients
    "Rational",
    "bernoulli",
    "coeff_c",
    "check_bernoulli_identity",
    "check_bernoulli_orthogonality",
    "CoefficientTable",
    # lattice
    "FeatureSet",
    "SubsetTable",
    "enumerate_subsets",
    "moebius_transform",
    "zeta_transform",
    # value functions
    "NoMatchingRows",
    "ValueTable",
    "ValueFunction",
    "InterventionalValueFunction",
    "ObservationalExactMatchValueFunction",
    "GamInducedValueFunction",
    "interventional_value",
    "observational_exactmatch_value",
    "gam_induced_value",
    "build_value_table",
    # models
    "PredictFn",
    "AdditiveModel",
    "additive_model",
    "ComponentMap",
    "ConstantComponent",
    "ProductComponent",
    "LookupComponent",
    "PolyFactor",
    "SineFactor",
    "StepFactor",
    "CheckerboardSpec",
    "checkerboard",
    "cell_center_grid",
    "KnnModel",
    "knn_model",
    "ExternalModel",
    "external_model",
    "ProcessFailed",
    "ProtocolTimeout",
    "fit_additive_marginal_means",
    # engine
    "InteractionIndex",
    "ShapleyGam",
    "RecoveryReport",
    "delta",
    "delta_all",
    "n_shapley_recursive",
    "n_shapley_explicit",
    "n_shapley_from_gam",
    "n_shapley_all_orders",
    "shapley_gam",
    "reduce_order",
    "classic_shapley_oracle",
    "recovery_check",
    # analysis
    "DegreeReport",
    "interaction_degree",
    "DependenceSeries",
    "partial_dependence",
]
