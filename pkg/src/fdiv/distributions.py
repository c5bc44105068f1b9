"""Analytic densities (Gaussian mixtures in one or two dimensions) and exact divergences.

Random numbers come from numpy's ``Generator`` over the PCG64 bit generator,
seeded explicitly everywhere; a given seed yields the same stream on every
platform for a fixed numpy version.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from ._numerics import as_float_array, gauss_legendre_panels
from .algebra import reverse
from .core import Divergence, f_of_log, s_curve

__all__ = [
    "CriticFn",
    "Density",
    "FitError",
    "OptimalCritic",
    "QuadratureError",
    "TwoPointDist",
    "bimodal_mixture",
    "circle_of_gaussians",
    "divergence_quadrature",
    "divergence_fixed_rule",
    "fit_gaussian",
    "gaussian_1d",
    "integrate_density",
    "load_density",
    "mismatch_decomposition",
    "optimal_critic",
    "reverse_kl_gauss_hermite",
    "save_density",
    "smoothed_two_point_pair",
    "two_point_divergence",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


class QuadratureError(RuntimeError):
    def __init__(self, message, value, abserr):
        super().__init__(f"{message} (value={value!r}, achieved error={abserr:.3g})")
        self.value = value
        self.abserr = abserr


class FitError(RuntimeError):
    def __init__(self, message, last):
        super().__init__(message)
        self.last = last


class CriticFn(Protocol):
    """A scalar function of data space with an input gradient."""

    def __call__(self, x) -> np.ndarray: ...

    def input_grad(self, x) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class Density:
    """A Gaussian mixture over R^1 or R^2.

    ``weights`` has shape (k,), ``means`` (k, D) and ``covs`` (k, D, D).
    Points are passed as arrays of shape (..., D); in one dimension the
    trailing axis may be dropped.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = as_float_array(self.weights).reshape(-1)
        mu = as_float_array(self.means)
        k = w.size
        mu = mu.reshape(k, -1)
        dim = mu.shape[1]
        cov = as_float_array(self.covs).reshape(k, dim, dim)
        if dim not in (1, 2):
            raise ValueError("only one- and two-dimensional densities are supported")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must be positive and sum to 1, got {w}")
        if not np.allclose(cov, np.swapaxes(cov, 1, 2)):
            raise ValueError("covariances must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariances must be positive definite") from None
        logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_prec", np.linalg.inv(cov))
        object.__setattr__(self, "_lognorm", np.log(w) - 0.5 * (dim * _LOG_2PI + logdet))

    # -- construction -------------------------------------------------------

    @classmethod
    def gaussian(cls, mean, cov):
        mean = np.atleast_1d(as_float_array(mean))
        cov = np.atleast_2d(as_float_array(cov))
        return cls(np.ones(1), mean[None], cov[None])

    @classmethod
    def mixture(cls, weights, means, covs):
        return cls(weights, means, covs)

    # -- descriptors --------------------------------------------------------

    @property
    def dimensions(self) -> int:
        return self.means.shape[1]

    @property
    def kind(self) -> str:
        base = "gaussian" if self.weights.size == 1 else "gaussian_mixture"
        sep = "" if self.weights.size == 1 else "_"
        return f"{base}{sep}{self.dimensions}d"

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def covariance(self) -> np.ndarray:
        m = self.mean()
        second = np.einsum("k,kij->ij", self.weights, self.covs + np.einsum("ki,kj->kij", self.means, self.means))
        return second - np.outer(m, m)

    def __eq__(self, other):
        if not isinstance(other, Density):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.covs, other.covs)
        )

    __hash__ = None

    def __repr__(self):
        return f"Density(kind={self.kind!r}, components={self.weights.size})"

    # -- evaluation ---------------------------------------------------------

    def _points(self, x):
        x = as_float_array(x)
        dim = self.dimensions
        if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            return x[..., None], x.shape
        if x.shape[-1] != dim:
            raise ValueError(f"expected points with trailing dimension {dim}, got shape {x.shape}")
        return x, x.shape[:-1]

    def _component_logs(self, pts):
        diff = pts[..., None, :] - self.means  # (..., k, D)
        maha = np.einsum("...ki,kij,...kj->...k", diff, self._prec, diff)
        return self._lognorm - 0.5 * maha, diff

    def log_density(self, x):
        """Natural log density; log-sum-exp over components for mixtures."""
        pts, shape = self._points(x)
        comp, _ = self._component_logs(pts)
        out = logsumexp(comp, axis=-1).reshape(shape)
        return float(out) if out.ndim == 0 else out

    def density(self, x):
        return np.exp(self.log_density(x))

    def grad_log_density(self, x):
        """Gradient of the log density; same shape as ``x``."""
        pts, shape = self._points(x)
        comp, diff = self._component_logs(pts)
        resp = np.exp(comp - logsumexp(comp, axis=-1, keepdims=True))
        grads = -np.einsum("kij,...kj->...ki", self._prec, diff)
        g = np.einsum("...k,...ki->...i", resp, grads)
        if self.dimensions == 1 and (as_float_array(x).ndim == 0 or as_float_array(x).shape[-1] != 1):
            g = g[..., 0]
            return float(g) if g.ndim == 0 else g
        return g

    def sample(self, n: int, seed=None, rng: np.random.Generator | None = None) -> np.ndarray:
        """Draw ``n`` points (shape (n,) in 1D, (n, 2) in 2D).

        Either a seed or an existing generator is used; component labels are
        drawn first, then Gaussian noise.
        """
        if n < 1:
            raise ValueError("n must be at least 1")
        if rng is None:
            rng = np.random.default_rng(seed)
        labels = rng.choice(self.weights.size, size=n, p=self.weights) if self.weights.size > 1 else np.zeros(n, int)
        z = rng.standard_normal((n, self.dimensions))
        x = self.means[labels] + np.einsum("nij,nj->ni", self._chol[labels], z)
        return x[:, 0] if self.dimensions == 1 else x

    def support_box(self, width: float = 10.0) -> np.ndarray:
        """(D, 2) array of per-axis [lo, hi] covering every component mean +- width sd."""
        sd = np.sqrt(np.diagonal(self.covs, axis1=1, axis2=2))
        lo = (self.means - width * sd).min(axis=0)
        hi = (self.means + width * sd).max(axis=0)
        return np.stack([lo, hi], axis=1)

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        comps = []
        for w, m, c in zip(self.weights, self.means, self.covs):
            comps.append({"weight": float(w), "mean": m.tolist(), "cov": c.tolist()})
        return {"kind": self.kind, "components": comps}

    @classmethod
    def from_dict(cls, data: dict) -> "Density":
        comps = data["components"]
        if not comps:
            raise ValueError("density needs at least one component")
        weights = [c.get("weight", 1.0) for c in comps]
        means = [np.atleast_1d(as_float_array(c["mean"])) for c in comps]
        dim = means[0].size
        covs = [np.atleast_2d(as_float_array(c["cov"])).reshape(dim, dim) for c in comps]
        dens = cls(np.array(weights), np.stack(means), np.stack(covs))
        kind = data.get("kind")
        if kind is not None and kind != dens.kind:
            raise ValueError(f"declared kind {kind!r} does not match components ({dens.kind})")
        return dens


def gaussian_1d(mean: float, sd: float) -> Density:
    return Density.gaussian([mean], [[sd * sd]])


def bimodal_mixture() -> Density:
    """The toy-experiment target ``0.5 N(0, 0.3^2) + 0.5 N(2, 1)``."""
    return Density([0.5, 0.5], [[0.0], [2.0]], [[[0.09]], [[1.0]]])


def circle_of_gaussians(n: int = 5, radius: float = 5.0) -> Density:
    angles = 2.0 * np.pi * np.arange(n) / n
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return Density(np.full(n, 1.0 / n), means, np.tile(np.eye(2), (n, 1, 1)))


def load_density(path) -> Density:
    with open(path) as fh:
        return Density.from_dict(json.load(fh))


def save_density(density: Density, path) -> None:
    with open(path, "w") as fh:
        json.dump(density.to_dict(), fh, indent=2)


# --------------------------------------------------------------------------
# critics


class OptimalCritic:
    """``d*(x) = log p(x) - log q(x)`` with its analytic input gradient."""

    label = "optimal"

    def __init__(self, p: Density, q: Density):
        if p.dimensions != q.dimensions:
            raise ValueError("p and q must have the same dimensionality")
        self.p = p
        self.q = q

    def __call__(self, x):
        return self.p.log_density(x) - self.q.log_density(x)

    def input_grad(self, x):
        return self.p.grad_log_density(x) - self.q.grad_log_density(x)


def optimal_critic(p: Density, q: Density) -> OptimalCritic:
    return OptimalCritic(p, q)


# --------------------------------------------------------------------------
# exact divergence evaluation


def _joint_box(p, q, width=10.0):
    a, b = p.support_box(width), q.support_box(width)
    return np.stack([np.minimum(a[:, 0], b[:, 0]), np.maximum(a[:, 1], b[:, 1])], axis=1)


def _pointwise_integrand(div, p, q, x):
    """``q f(p/q)`` written as ``max(p, q) s_f(log p - log q)``."""
    lp, lq = p.log_density(x), q.log_density(x)
    s = as_float_array(s_curve(div, lp - lq))
    w = np.exp(np.maximum(lp, lq))
    with np.errstate(invalid="ignore"):
        out = w * s
    return np.where(w == 0.0, 0.0, out)


def _quad_1d(fn, lo, hi, points, epsabs, epsrel, what):
    pts = sorted({float(x) for x in points if lo < x < hi})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, *rest = integrate.quad(
            fn, lo, hi, points=pts or None, epsabs=epsabs, epsrel=epsrel, limit=1000, full_output=1
        )
    if err > 10.0 * max(epsabs, epsrel * abs(val)):
        raise QuadratureError(f"{what}: quadrature did not converge", val, err)
    return val


def _tensor_rule_2d(fn, box, tol, panels=None):
    """Tensor-product composite Gauss-Legendre rule, refined until two levels agree."""
    n = panels or max(8, int(np.ceil((box[:, 1] - box[:, 0]).max())))
    prev = None
    for _ in range(6):
        xs, wx = gauss_legendre_panels(box[0, 0], box[0, 1], n)
        ys, wy = gauss_legendre_panels(box[1, 0], box[1, 1], n)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        vals = fn(np.stack([gx, gy], axis=-1))
        est = float(np.einsum("i,ij,j->", wx, vals, wy))
        if prev is not None and abs(est - prev) < tol:
            return est
        prev = est
        n *= 2
    raise QuadratureError("2D tensor rule did not converge", est, abs(est - prev))


def integrate_density(dens: Density, tol: float | None = None) -> float:
    """Total mass of ``dens`` by quadrature over its support box."""
    box = dens.support_box()
    if dens.dimensions == 1:
        return _quad_1d(dens.density, box[0, 0], box[0, 1], dens.means[:, 0], tol or 1e-10, 1e-12, "mass")
    return _tensor_rule_2d(dens.density, box, tol or 1e-9)


def divergence_quadrature(div: Divergence, p: Density, q: Density, epsabs: float | None = None,
                          epsrel: float = 1e-10) -> float:
    """``D_f(p, q) = E_q[f(p/q)]`` by adaptive quadrature.

    The integrand is evaluated as ``max(p, q) * s_f(log p - log q)``, which is
    algebraically identical to ``q f(p/q)`` but never forms ``p/q``.  The
    domain covers every component mean +- 10 standard deviations.
    Default absolute tolerance is 1e-8 in 1D and 1e-6 in 2D.
    """
    if p.dimensions != q.dimensions:
        raise ValueError("p and q must have the same dimensionality")
    box = _joint_box(p, q)
    if p.dimensions == 1:
        pts = np.concatenate([p.means[:, 0], q.means[:, 0]])
        return _quad_1d(lambda x: float(_pointwise_integrand(div, p, q, x)), box[0, 0], box[0, 1], pts,
                        epsabs if epsabs is not None else 1e-8, epsrel, f"D[{div.name}]")
    return _tensor_rule_2d(lambda x: _pointwise_integrand(div, p, q, x), box,
                           epsabs if epsabs is not None else 1e-6)


class FixedRule:
    """A reusable composite Gauss-Legendre rule on a 1D interval.

    Vectorised evaluation of many divergences on a shared node set; used for
    contour grids where thousands of cells are evaluated.
    """

    def __init__(self, lo: float, hi: float, panel_width: float, order: int = 12):
        n = max(1, int(np.ceil((hi - lo) / panel_width)))
        self.nodes, self.weights = gauss_legendre_panels(lo, hi, n, order)


def divergence_fixed_rule(div: Divergence, p: Density, mus, sigmas, rule: FixedRule) -> np.ndarray:
    """``D_f(p, N(mu, sigma^2))`` for broadcastable ``mus``/``sigmas`` on a fixed 1D rule."""
    x = rule.nodes
    lp = p.log_density(x)
    mus = as_float_array(mus)[..., None]
    sigmas = as_float_array(sigmas)[..., None]
    lq = -0.5 * ((x - mus) / sigmas) ** 2 - np.log(sigmas) - 0.5 * _LOG_2PI
    s = as_float_array(s_curve(div, lp - lq))
    w = np.exp(np.maximum(lp, lq))
    with np.errstate(invalid="ignore"):
        vals = np.where(w == 0.0, 0.0, w * s)
    return vals @ rule.weights


def mismatch_decomposition(div: Divergence, p: Density, q: Density, epsabs: float = 1e-10):
    """Split ``D_f`` into left (``q > p``) and right (``q < p``) mismatch integrals."""
    if p.dimensions != 1:
        box = _joint_box(p, q)

        def part(sign):
            def fn(x):
                d = p.log_density(x) - q.log_density(x)
                return np.where(sign * d > 0, _pointwise_integrand(div, p, q, x), 0.0)
            return _tensor_rule_2d(fn, box, 1e-7)

        return part(-1.0), part(1.0)

    box = _joint_box(p, q)
    pts = np.concatenate([p.means[:, 0], q.means[:, 0]])

    def part(sign):
        def fn(x):
            lp, lq = p.log_density(x), q.log_density(x)
            if sign * (lp - lq) <= 0:
                return 0.0
            return float(_pointwise_integrand(div, p, q, x))
        return _quad_1d(fn, box[0, 0], box[0, 1], pts, epsabs, 1e-10, f"mismatch[{div.name}]")

    return part(-1.0), part(1.0)


# --------------------------------------------------------------------------
# two-point distributions


@dataclass(frozen=True)
class TwoPointDist:
    """Distribution on {0, 1} with mass ``prob_at_zero`` at 0."""

    prob_at_zero: float

    def __post_init__(self):
        if not 0.0 < self.prob_at_zero < 1.0:
            raise ValueError("prob_at_zero must lie strictly inside (0, 1)")


def two_point_divergence(div: Divergence, r: float, s: float, one_minus_s: float | None = None) -> float:
    """``D_f(p_r, q_s) = s f(r/s) + (1-r) f_R((1-s)/(1-r))``.

    ``one_minus_s`` may be given explicitly when ``s`` is too close to 1 to be
    represented.
    """
    TwoPointDist(r)
    cs = 1.0 - s if one_minus_s is None else one_minus_s
    if not 0.0 < cs < 1.0:
        raise ValueError("s must lie strictly inside (0, 1)")
    log_s = np.log1p(-cs)
    left = (1.0 - cs) * float(f_of_log(div, np.log(r) - log_s))
    right = (1.0 - r) * float(f_of_log(reverse(div), np.log(cs) - np.log1p(-r)))
    return left + right


def smoothed_two_point_pair(r: float, s: float, sigma: float, mu0: float = 0.0, mu1: float = 1.0):
    """Gaussian mixtures at ``mu0``/``mu1`` with weights ``(r, 1-r)`` and ``(s, 1-s)``.

    As ``sigma -> 0`` their divergence increases to ``two_point_divergence(r, s)``.
    """
    TwoPointDist(r)
    TwoPointDist(s)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    means, covs = [mu0, mu1], [sigma**2, sigma**2]
    return Density.mixture([r, 1 - r], means, covs), Density.mixture([s, 1 - s], means, covs)


# --------------------------------------------------------------------------
# Gaussian fits


def _project_cov(cov, constraint):
    dim = cov.shape[0]
    if constraint == "diagonal":
        return np.diag(np.diag(cov))
    if constraint == "isotropic":
        return np.eye(dim) * np.trace(cov) / dim
    raise ValueError(f"unknown constraint {constraint!r}")


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(60)
_GH_WEIGHTS = _GH_WEIGHTS / np.sqrt(2.0 * np.pi)


def reverse_kl_gauss_hermite(p: Density, mean, variances) -> float:
    """``KL(q || p)`` for ``q = N(mean, diag(variances))`` by Gauss-Hermite quadrature.

    The cross-entropy term is integrated in standardised coordinates on a
    fixed tensor grid; the entropy of ``q`` is analytic.  The result is a
    smooth function of the parameters, which keeps finite-difference
    gradients clean.
    """
    mean = as_float_array(mean)
    sd = np.sqrt(as_float_array(variances))
    dim = mean.size
    grids = np.meshgrid(*([_GH_NODES] * dim), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=1)
    w = np.ones(z.shape[0])
    for g in np.meshgrid(*([_GH_WEIGHTS] * dim), indexing="ij"):
        w = w * g.ravel()
    x = mean + sd * z
    pts = x if dim > 1 else x[:, 0]
    cross = -float(w @ p.log_density(pts))
    entropy = 0.5 * (dim * (1.0 + _LOG_2PI) + np.log(sd**2).sum())
    return cross - entropy


def fit_gaussian(p: Density, objective: str, constraint: str, init: Density | None = None,
                 tol: float = 1e-6, max_iter: int = 10_000) -> Density:
    """Fit a constrained Gaussian ``q`` to ``p``.

    ``objective="KL"`` minimises ``KL(p || q)`` and reduces to moment matching.
    ``objective="RKL"`` minimises ``KL(q || p)`` by gradient descent with
    backtracking on central-difference gradients, stopping when the gradient
    norm drops below ``tol``.  Without ``init`` a reverse-KL fit starts from
    the component of ``p`` with the tallest peak, projected onto the
    constraint.
    """
    objective = objective.upper()
    if objective == "KL":
        return Density.gaussian(p.mean(), _project_cov(p.covariance(), constraint))
    if objective != "RKL":
        raise ValueError(f"objective must be KL or RKL, got {objective!r}")

    dim = p.dimensions
    if init is None:
        peak = int(np.argmax(p._lognorm))
        init = Density.gaussian(p.means[peak], _project_cov(p.covs[peak], constraint))
    mean0 = init.mean()
    var0 = np.diag(_project_cov(init.covariance(), constraint))

    if constraint == "diagonal":
        def unpack(theta):
            return theta[:dim], np.exp(theta[dim:])
        theta = np.concatenate([mean0, np.log(var0)])
    elif constraint == "isotropic":
        def unpack(theta):
            return theta[:dim], np.full(dim, np.exp(theta[dim]))
        theta = np.concatenate([mean0, [np.log(var0.mean())]])
    else:
        raise ValueError(f"unknown constraint {constraint!r}")

    def loss(th):
        m, v = unpack(th)
        return reverse_kl_gauss_hermite(p, m, v)

    def grad(th, h=1e-5):
        g = np.empty_like(th)
        for i in range(th.size):
            e = np.zeros_like(th)
            e[i] = h
            g[i] = (loss(th + e) - loss(th - e)) / (2 * h)
        return g

    step = 1.0
    value = loss(theta)
    for _ in range(max_iter):
        g = grad(theta)
        if np.linalg.norm(g) < tol:
            m, v = unpack(theta)
            return Density.gaussian(m, np.diag(v))
        while True:
            cand = theta - step * g
            cand_value = loss(cand)
            if cand_value <= value - 0.5 * step * (g @ g) or step < 1e-12:
                break
            step *= 0.5
        theta, value = cand, cand_value
        step = min(step * 2.0, 1.0)
    m, v = unpack(theta)
    raise FitError("reverse-KL fit did not converge", Density.gaussian(m, np.diag(v)))
