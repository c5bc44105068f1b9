"""Variational lower bound, generator/critic objectives and gradient matching."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._numerics import as_float_array
from .algebra import ns_partner
from .core import Divergence, dual_coords
from .distributions import Density, _joint_box, _quad_1d, divergence_quadrature, gaussian_1d, optimal_critic

__all__ = [
    "BoundEstimate",
    "GradientMatch",
    "Mode",
    "SchemeConfig",
    "bound_estimate",
    "bound_quadrature",
    "critic_objective",
    "generator_objective",
    "gradient_matching_check",
    "variational_gradient",
]


class Mode(str, enum.Enum):
    SATURATING = "saturating"
    NON_SATURATING = "non_saturating"


@dataclass(frozen=True)
class SchemeConfig:
    """A hybrid ``(f, h)`` scheme: generator divergence ``f``, critic divergence ``h``."""

    generator_divergence: Divergence
    critic_divergence: Divergence
    mode: Mode = Mode.SATURATING

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def minimized_divergence(self) -> Divergence:
        """The divergence whose stationary points are the fixed points of training."""
        if self.mode is Mode.SATURATING:
            return self.generator_divergence
        return ns_partner(self.generator_divergence)


@dataclass(frozen=True)
class BoundEstimate:
    value: float
    term_p: float
    term_q: float
    n_p: int
    n_q: int
    std_error: float

    def to_dict(self):
        return dict(self.__dict__)


def bound_estimate(div: Divergence, samples_p, samples_q, critic) -> BoundEstimate:
    """Monte Carlo ``E_f = mean_p a_f(d(x)) - mean_q b_f(d(x))``."""
    samples_p, samples_q = as_float_array(samples_p), as_float_array(samples_q)
    if len(samples_p) == 0 or len(samples_q) == 0:
        raise ValueError("both sample sets must be nonempty")
    a = np.atleast_1d(dual_coords(div, critic(samples_p)).a)
    b = np.atleast_1d(dual_coords(div, critic(samples_q)).b)
    term_p, term_q = float(np.mean(a)), float(np.mean(b))
    se = float(np.sqrt(np.var(a) / a.size + np.var(b) / b.size))
    return BoundEstimate(term_p - term_q, term_p, term_q, a.size, b.size, se)


def bound_quadrature(div: Divergence, p: Density, q: Density, critic, epsabs: float = 1e-11) -> float:
    """Deterministic ``E_f(p, q, d)`` by 1D quadrature."""
    if p.dimensions != 1:
        raise ValueError("bound_quadrature supports one-dimensional densities")
    box = _joint_box(p, q)
    pts = np.concatenate([p.means[:, 0], q.means[:, 0]])

    def integrand(x):
        dc = dual_coords(div, critic(x))
        return p.density(x) * dc.a - q.density(x) * dc.b

    return _quad_1d(integrand, box[0, 0], box[0, 1], pts, epsabs, 1e-10, f"E[{div.name}]")


def generator_objective(div: Divergence, mode, critic_values):
    """Generator loss and its per-sample derivative with respect to ``d``.

    Saturating: ``-mean b_f(d)``; non-saturating: ``-mean a_f(d)``.  The
    derivative array already includes the ``1/n`` factor, so summing
    ``dloss_dd * dd/dtheta`` gives the parameter gradient.
    """
    d = np.atleast_1d(as_float_array(critic_values))
    dc = dual_coords(div, d)
    n = d.size
    if Mode(mode) is Mode.SATURATING:
        return -float(np.mean(dc.b)), -as_float_array(dc.b_prime) / n
    return -float(np.mean(dc.a)), -as_float_array(dc.a_prime) / n


def critic_objective(div: Divergence, d_on_p, d_on_q):
    """Critic objective ``E_f`` and its per-sample ascent gradients."""
    dp = np.atleast_1d(as_float_array(d_on_p))
    dq = np.atleast_1d(as_float_array(d_on_q))
    if dp.size == 0 or dq.size == 0:
        raise ValueError("critic batches must be nonempty")
    cp, cq = dual_coords(div, dp), dual_coords(div, dq)
    value = float(np.mean(cp.a) - np.mean(cq.b))
    return value, as_float_array(cp.a_prime) / dp.size, -as_float_array(cq.b_prime) / dq.size


# --------------------------------------------------------------------------
# gradient matching


@dataclass(frozen=True)
class GradientMatch:
    analytic: np.ndarray
    variational: np.ndarray
    discrepancy: float


def variational_gradient(div: Divergence, p: Density, mu: float, sigma: float, epsabs: float = 1e-12) -> np.ndarray:
    """Reparameterised generator gradient of ``E_f`` at the optimal critic, by quadrature.

    ``-E_z[b_f'(d*(x)) d*'(x) (1, z)]`` with ``x = mu + sigma z`` and ``d*``
    held fixed.  The change of variables to ``x`` is integrated over the joint
    support box;  ``q b_f'(d*) = p a_f'(d*)`` is used on the side where
    ``p > q`` so neither factor is evaluated where it overflows.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    q = gaussian_1d(mu, sigma)
    critic = optimal_critic(p, q)
    box = _joint_box(p, q)
    pts = np.concatenate([p.means[:, 0], q.means[:, 0]])

    def weight(x):
        lp, lq = p.log_density(x), q.log_density(x)
        d = lp - lq
        dc = dual_coords(div, d)
        w = np.exp(lp) * dc.a_prime if d > 0 else np.exp(lq) * dc.b_prime
        return w * critic.input_grad(x)

    g_mu = -_quad_1d(weight, box[0, 0], box[0, 1], pts, epsabs, 1e-11, "grad mu")
    g_sigma = -_quad_1d(lambda x: weight(x) * (x - mu) / sigma, box[0, 0], box[0, 1], pts, epsabs, 1e-11,
                        "grad sigma")
    return np.array([g_mu, g_sigma])


def _fd_gradient(div, p, mu, sigma, h=1e-4):
    def D(m, s):
        return divergence_quadrature(div, p, gaussian_1d(m, s), epsabs=1e-14, epsrel=1e-12)

    return np.array([
        (D(mu + h, sigma) - D(mu - h, sigma)) / (2 * h),
        (D(mu, sigma + h) - D(mu, sigma - h)) / (2 * h),
    ])


def gradient_matching_check(div: Divergence, p: Density, params) -> GradientMatch:
    """Compare finite differences of ``D_f(p, N(mu, sigma^2))`` with the variational gradient.

    ``discrepancy`` is the max-norm of the difference relative to the
    max-norm of the finite-difference gradient.
    """
    mu, sigma = params
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    analytic = _fd_gradient(div, p, mu, sigma)
    variational = variational_gradient(div, p, mu, sigma)
    scale = max(np.max(np.abs(analytic)), 1e-300)
    return GradientMatch(analytic, variational, float(np.max(np.abs(analytic - variational)) / scale))
