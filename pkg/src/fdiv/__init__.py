"""f-divergence calculus, variational bounds and a toy GAN experiment."""

from .algebra import BoundInfo, TailWeights, bounds, ns_partner, reverse, soften_p, soften_q, symmetrize, tail_weights
from .core import (
    BUILTIN_NAMES,
    Divergence,
    DivergenceOverflowWarning,
    DomainError,
    DualCoords,
    Provenance,
    dual_coords,
    evaluate,
    from_fpp,
    make_builtin,
    s_curve,
)
from .distributions import (
    Density,
    FitError,
    QuadratureError,
    TwoPointDist,
    bimodal_mixture,
    circle_of_gaussians,
    divergence_quadrature,
    fit_gaussian,
    gaussian_1d,
    mismatch_decomposition,
    optimal_critic,
    two_point_divergence,
)
from .variational import (
    BoundEstimate,
    Mode,
    SchemeConfig,
    bound_estimate,
    critic_objective,
    generator_objective,
    gradient_matching_check,
)

__version__ = "0.1.0"
