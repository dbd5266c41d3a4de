"""Higher connections on multivector fields over polynomial charts."""
__version__ = "0.1.0"

from .bilinear import (
    BilinearFormEta,
    Metric,
    classify_eta,
    construct_parallel,
    eta_from_forms,
    forms_from_eta,
    is_parallel,
    levi_civita,
)
from .connection import (
    AffineConnection,
    HigherConnection,
    TwistFields,
    cov_form,
    decompose,
    lower_induced_from,
    torsion,
    torsion_report,
    upper_induced_from,
)
from .errors import HiconnError
from .exterior import (
    DifferentialForm,
    MultiVectorField,
    d,
    interior_fn,
    interior_form,
    lie,
    pair,
    snb,
    wedge,
)
from .multilinear import KVector, Subspace, dual_separator, subspaces_intersect
from .scalar import Chart, SamplePlan, ScalarField, evaluate, fields_equal_on, parse, partial, to_dsl

__all__ = [
    "AffineConnection", "BilinearFormEta", "Chart", "DifferentialForm", "HiconnError", "HigherConnection",
    "KVector", "Metric", "MultiVectorField", "SamplePlan", "ScalarField", "Subspace", "TwistFields",
    "classify_eta", "construct_parallel", "cov_form", "d", "decompose", "dual_separator", "eta_from_forms",
    "evaluate", "fields_equal_on", "forms_from_eta", "interior_fn", "interior_form", "is_parallel",
    "levi_civita", "lie", "lower_induced_from", "pair", "parse", "partial", "snb", "subspaces_intersect",
    "to_dsl", "torsion", "torsion_report", "upper_induced_from", "wedge",
]
