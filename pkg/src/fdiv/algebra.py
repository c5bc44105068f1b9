"""Operators producing new divergences, and tail/boundedness classification."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ._numerics import LN2, as_float_array, sigmoid, softplus
from .core import (
    Divergence,
    Provenance,
    dual_coords,
    f_of_log,
    from_fpp,
    make_builtin,
    s_curve,
)

__all__ = [
    "BoundInfo",
    "TailWeights",
    "bounds",
    "ns_partner",
    "reverse",
    "soften_p",
    "soften_q",
    "symmetrize",
    "tail_weights",
]


def _dual_tuple(div, d):
    dc = dual_coords(div, d)
    return dc.a, dc.b, dc.a_prime, dc.b_prime


def reverse(div: Divergence) -> Divergence:
    """Csiszar dual ``f_R(u) = u f(1/u)``, so that ``D_{f_R}(p, q) = D_f(q, p)``."""

    def f(u):
        u = as_float_array(u)
        return u * div.f(1.0 / u)

    def f_prime(u):
        u = as_float_array(u)
        v = 1.0 / u
        return div.f(v) - v * div.f_prime(v)

    def f_double_prime(u):
        u = as_float_array(u)
        return div.f_double_prime(1.0 / u) / (u * u * u)

    def s(d):
        return as_float_array(s_curve(div, -as_float_array(d)))

    def dual(d):
        a, b, ap, bp = _dual_tuple(div, -d)
        return -b, -a, bp, ap

    tails = None if div.analytic_tails is None else div.analytic_tails[::-1]
    return Divergence(f"reverse({div.name})", f, f_prime, f_double_prime, tails, Provenance.DERIVED, s, dual)


def symmetrize(div: Divergence) -> Divergence:
    """``(D(p, q) + D(q, p)) / 2``."""
    rev = reverse(div)

    def avg(g, h):
        return lambda x: 0.5 * (g(x) + h(x))

    def dual(d):
        one, two = _dual_tuple(div, d), _dual_tuple(rev, d)
        return tuple(0.5 * (x + y) for x, y in zip(one, two))

    tails = None
    if div.analytic_tails is not None:
        m = max(div.analytic_tails)
        tails = (m, m)
    return Divergence(
        f"symmetrize({div.name})",
        avg(div.f, rev.f),
        avg(div.f_prime, rev.f_prime),
        avg(div.f_double_prime, rev.f_double_prime),
        tails,
        Provenance.DERIVED,
        avg(lambda d: as_float_array(s_curve(div, d)), rev.s),
        dual,
    )


def soften_q(div: Divergence) -> Divergence:
    """Replace ``q`` by ``m = (p + q)/2``: ``D~(p, q) = 4 D(p, m)``.

    ``f~(u) = 2(1+u) f(2u/(1+u))``.  With ``t = log(2 sigma(d))`` the dual
    coordinates compose as ``b~(d) = 2 b(t)`` and ``a~(d) = 4 a(t) - 2 b(t)``.
    """

    def f(u):
        u = as_float_array(u)
        return 2.0 * (1.0 + u) * div.f(2.0 * u / (1.0 + u))

    def f_prime(u):
        u = as_float_array(u)
        v = 2.0 * u / (1.0 + u)
        return 2.0 * div.f(v) + 4.0 * div.f_prime(v) / (1.0 + u)

    def f_double_prime(u):
        u = as_float_array(u)
        return 8.0 / (1.0 + u) ** 3 * div.f_double_prime(2.0 * u / (1.0 + u))

    def s(d):
        d = as_float_array(d)
        t = LN2 - softplus(-d)
        return 2.0 * (1.0 + np.exp(-np.abs(d))) * f_of_log(div, t)

    def dual(d):
        t = LN2 - softplus(-d)
        a, b, _, _ = _dual_tuple(div, t)
        sp, sm = sigmoid(d), sigmoid(-d)
        g = div.f_double_prime(2.0 * sp)
        return 4.0 * a - 2.0 * b, 2.0 * b, 8.0 * sp * sm * sm * g, 8.0 * sp * sp * sm * g

    tails = None if div.analytic_tails is None else (div.analytic_tails[0], 0.0)
    return Divergence(f"soften_q({div.name})", f, f_prime, f_double_prime, tails, Provenance.DERIVED, s, dual)


def soften_p(div: Divergence) -> Divergence:
    """Replace ``p`` by ``m = (p + q)/2``: ``D~(p, q) = 4 D(m, q)``, ``f~(u) = 4 f((1+u)/2)``."""

    def f(u):
        return 4.0 * div.f(0.5 * (1.0 + as_float_array(u)))

    def f_prime(u):
        return 2.0 * div.f_prime(0.5 * (1.0 + as_float_array(u)))

    def f_double_prime(u):
        return div.f_double_prime(0.5 * (1.0 + as_float_array(u)))

    def s(d):
        d = as_float_array(d)
        t = softplus(d) - LN2
        out = np.empty_like(d)
        neg = d <= 0
        out[neg] = 4.0 * f_of_log(div, t[neg])
        tp = t[~neg]
        out[~neg] = 4.0 * np.exp(softplus(-d[~neg]) - LN2) * as_float_array(s_curve(div, tp))
        return out

    def dual(d):
        t = softplus(d) - LN2
        a, b, _, _ = _dual_tuple(div, t)
        u = np.exp(d)
        g = div.f_double_prime(0.5 * (1.0 + u))
        return 2.0 * a, 4.0 * b - 2.0 * a, u * g, u * u * g

    tails = None if div.analytic_tails is None else (0.0, div.analytic_tails[1])
    return Divergence(f"soften_p({div.name})", f, f_prime, f_double_prime, tails, Provenance.DERIVED, s, dual)


_KNOWN_PARTNERS = {"KL": "RKL", "RKL": "NeymannChi2", "JS4": "SRKL"}


def ns_partner(h: Divergence, prefer_builtin: bool = True) -> Divergence:
    """Divergence minimised by non-saturating training against critic divergence ``h``.

    Its second derivative is ``f''(u) = h''(u)/u``, which makes ``b_f = a_h``.
    For built-ins whose partner is itself a built-in (KL, RKL, JS4) the closed
    form is returned unless ``prefer_builtin`` is false.
    """
    if prefer_builtin and h.provenance is Provenance.BUILTIN and h.name in _KNOWN_PARTNERS:
        return dataclasses.replace(make_builtin(_KNOWN_PARTNERS[h.name]), provenance=Provenance.DERIVED)

    def fpp(u):
        u = as_float_array(u)
        return h.f_double_prime(u) / u

    base = from_fpp(fpp, f"ns_partner({h.name})")

    def dual(d):
        a_h, _, ap_h, _ = _dual_tuple(h, d)
        u = np.exp(d)
        return base.f_prime(u), a_h, u * fpp(u), ap_h

    tails = None
    if h.analytic_tails is not None:
        tails = (h.analytic_tails[0] + 1.0, h.analytic_tails[1] - 1.0)
    return dataclasses.replace(base, analytic_tails=tails, provenance=Provenance.DERIVED, dual=dual)


# --------------------------------------------------------------------------
# classification

_LEFT_PROBES = np.array([1e-5, 1e-6, 1e-7, 1e-8])
_RIGHT_PROBES = np.array([1e5, 1e6, 1e7, 1e8])
_MAX_SPREAD = 0.1
# tail weights closer than this to 2 are treated as 2 when classifying boundedness
_BOUNDED_MARGIN = 1e-3


@dataclass(frozen=True)
class TailWeights:
    left: float | None
    right: float | None
    left_coeff: float | None
    right_coeff: float | None
    status: str = "ok"

    @property
    def bounded(self) -> bool | None:
        if self.left is None or self.right is None:
            return None
        return self.left < 2.0 - _BOUNDED_MARGIN and self.right < 2.0 - _BOUNDED_MARGIN


def _extrapolate(slopes):
    """Aitken extrapolation of a sequence of log-slopes converging geometrically."""
    x1, x2, x3 = slopes[-3:]
    d1, d2 = x2 - x1, x3 - x2
    denom = d2 - d1
    if abs(d2) < 1e-12 or abs(denom) < 1e-14:
        return x3
    corrected = x3 - d2 * d2 / denom
    # the correction should be of the order of the last step; otherwise the
    # sequence is not geometric and the raw last slope is the safer estimate
    if abs(corrected - x3) > 10.0 * abs(d2):
        return x3
    return corrected


def _log_slopes(div, probes):
    with np.errstate(all="ignore"):
        vals = np.asarray(div.f_double_prime(probes), dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        return None
    return np.diff(np.log(vals)) / np.diff(np.log(probes))


def tail_weights(div: Divergence) -> TailWeights:
    """Numeric left/right tail weights from power-law fits of ``f''``.

    ``f''(u) ~ C u^-L`` as ``u -> 0`` and ``f''(u) ~ D u^(R-3)`` as
    ``u -> inf``.  Slopes of ``log f''`` between successive probes are
    extrapolated; a spread above 0.1 is reported as no power-law tail.
    """
    problems = []
    left = right = c = dcoef = None

    slopes = _log_slopes(div, _LEFT_PROBES)
    if slopes is None or np.ptp(slopes) > _MAX_SPREAD:
        problems.append("no power-law left tail")
    else:
        left = -_extrapolate(slopes)
        u0 = _LEFT_PROBES[-1]
        c = float(div.f_double_prime(u0) * u0**left)

    slopes = _log_slopes(div, _RIGHT_PROBES)
    if slopes is None or np.ptp(slopes) > _MAX_SPREAD:
        problems.append("no power-law right tail")
    else:
        right = 3.0 + _extrapolate(slopes)
        u1 = _RIGHT_PROBES[-1]
        dcoef = float(div.f_double_prime(u1) * u1 ** (3.0 - right))

    status = "; ".join(problems) if problems else "ok"
    return TailWeights(
        None if left is None else float(left),
        None if right is None else float(right),
        c,
        dcoef,
        status,
    )


@dataclass(frozen=True)
class BoundInfo:
    m0: float
    m_inf: float
    m: float

    @property
    def bounded(self) -> bool:
        return bool(np.isfinite(self.m))


_BOUND_PROBES = -np.log(np.array([1e-9, 1e-12]))


def _tail_limit(div, sign):
    # s_f(-k) = f(e^-k) and s_f(k) = f_R(e^-k); both are monotone in k
    mid, far = (float(s_curve(div, sign * k)) for k in _BOUND_PROBES)
    if not np.isfinite(far):
        return float("inf")
    if far - mid > 1e-6 * max(1.0, abs(far)):
        return float("inf")
    return far


def bounds(div: Divergence) -> BoundInfo:
    """``M0 = sup f on (0,1)``, ``M_inf = sup f(u)/u on (1, inf)`` and ``M = M0 + M_inf``."""
    m0 = _tail_limit(div, -1.0)
    m_inf = _tail_limit(div, 1.0)
    return BoundInfo(m0, m_inf, m0 + m_inf)
