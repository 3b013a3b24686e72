"""Explicit meromorphic solutions of linear q-difference equations.

Solves ``y(qx) = m(x) y(x) [+ r(x)]`` for ``|q| > 1`` with theta
functions and infinite products, predicts where the zeros and poles of
the solution lie (discrete q-spirals ``a q^S``) and checks both
numerically.
"""
from .errors import *  # noqa: F401,F403
from .numerics import (
    DEFAULT_POLICY,
    PowerSeries,
    QParameter,
    TruncationPolicy,
    f_a_eval,
    g_transform,
    qpochhammer,
    theta_derivative,
    theta_eval,
    theta_product_eval,
)
from .coefficients import (
    BuiltinFamily,
    FactoredForm,
    FiniteFamily,
    LaurentFactoredForm,
    coerce_coefficient,
    evaluate_coefficient,
    format_coefficient,
    parse_coefficient,
    split_at_modulus,
)
from .spirals import Spiral, SpiralCatalog, SpiralKind, merge_spirals
from .expr import differentiate_solution, evaluate_solution
from .rational import RationalFunction
from .homogeneous import Solution, solve_entire, solve_homogeneous, solve_mer_c, solve_mer_cstar
from .inhomogeneous import (
    AdditiveDecomposition,
    RightHandSide,
    additive_decompose,
    solve_additive,
    solve_inhomogeneous,
    tail_series_eval,
)
from .operators import (
    FirstOrderFactor,
    NewtonPolygon,
    QDifferenceOperator,
    auto_factor,
    cascade_solve,
    newton_polygon,
    verify_factorization,
)
from .verify import check_catalog, count_zeros_poles, residual_report

__version__ = "0.1.0"
