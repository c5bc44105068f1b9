"""f-divergences represented by their defining functions.

A :class:`Divergence` bundles vectorised evaluators for ``f``, ``f'`` and
``f''`` under the normalisation ``f(1) = f'(1) = 0``.  Built-ins are
canonical (``f''(1) = 1``) and additionally carry closed forms for the
symmetry-preserving curve ``s_f`` and for the dual coordinates
``a_f(d) = f'(e^d)`` and ``b_f(d) = e^d f'(e^d) - f(e^d)``, written so they stay
accurate at large ``|d|`` where the generic ``f``-based formulas cancel
catastrophically.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from ._numerics import LN2, as_float_array, scalarize, sigmoid, softplus

__all__ = [
    "BUILTIN_NAMES",
    "D_CLAMP",
    "Divergence",
    "DivergenceOverflowWarning",
    "DomainError",
    "DualCoords",
    "Evaluation",
    "Provenance",
    "dual_coords",
    "evaluate",
    "from_fpp",
    "make_builtin",
    "resolve_name",
    "s_curve",
]

D_CLAMP = 60.0
# Beyond this e^d is not representable; the generic s_f fallback clamps here.
_S_GENERIC_LIMIT = 700.0


class DomainError(ValueError):
    """Raised when a defining function is evaluated outside (0, inf)."""


class DivergenceOverflowWarning(RuntimeWarning):
    """An evaluator saturated to +-inf."""


class Provenance(str, enum.Enum):
    BUILTIN = "builtin"
    DERIVED = "derived-by-operator"
    FROM_FPP = "from-fpp"


Evaluator = Callable[[np.ndarray], np.ndarray]
DualEvaluator = Callable[[np.ndarray], tuple]


@dataclass(frozen=True, eq=False)
class Divergence:
    """An f-divergence given by its defining function.

    ``s`` and ``dual`` are optional closed forms; when absent the generic
    formulas in :func:`s_curve` and :func:`dual_coords` are used.
    """

    name: str
    f: Evaluator
    f_prime: Evaluator
    f_double_prime: Evaluator
    analytic_tails: tuple[float, float] | None = None
    provenance: Provenance = Provenance.BUILTIN
    s: Evaluator | None = None
    dual: DualEvaluator | None = None

    def __repr__(self):
        return f"Divergence({self.name!r}, provenance={self.provenance.value})"


class Evaluation(NamedTuple):
    f: float
    f_prime: float
    f_double_prime: float


@dataclass(frozen=True)
class DualCoords:
    a: np.ndarray | float
    b: np.ndarray | float
    a_prime: np.ndarray | float
    b_prime: np.ndarray | float
    clamped: bool = False


# --------------------------------------------------------------------------
# piecewise helper: evaluates each branch only on its own subset so that
# overflow in the unused branch never leaks NaN into the result

def _piecewise(d, left, right):
    d = as_float_array(d)
    out = np.empty_like(d)
    neg = d <= 0
    with np.errstate(over="ignore"):
        if np.any(neg):
            out[neg] = left(d[neg])
        if not np.all(neg):
            out[~neg] = right(d[~neg])
    return out


# --------------------------------------------------------------------------
# KL: f(u) = u log u - u + 1

def _kl_f(u):
    return u * np.log(u) - (u - 1.0)


def _kl_fp(u):
    return np.log(u)


def _kl_fpp(u):
    return 1.0 / u


def _kl_s(d):
    return _piecewise(d, lambda t: t * np.exp(t) - np.expm1(t), lambda t: t + np.expm1(-t))


def _kl_dual(d):
    return d, np.expm1(d), np.ones_like(d), np.exp(d)


# RKL: f(u) = u - 1 - log u

def _rkl_f(u):
    return (u - 1.0) - np.log(u)


def _rkl_fp(u):
    return 1.0 - 1.0 / u


def _rkl_fpp(u):
    return 1.0 / (u * u)


def _rkl_s(d):
    return _kl_s(-as_float_array(d))


def _rkl_dual(d):
    return -np.expm1(-d), d, np.exp(-d), np.ones_like(d)


# JS4 = 4 JS(p, q): f(u) = 2u log(2u/(1+u)) + 2 log(2/(1+u))

def _js_f(u):
    return 2.0 * u * np.log1p((u - 1.0) / (1.0 + u)) + 2.0 * np.log1p((1.0 - u) / (1.0 + u))


def _js_fp(u):
    return 2.0 * np.log1p((u - 1.0) / (1.0 + u))


def _js_fpp(u):
    return 2.0 / (u * (1.0 + u))


def _js_s(d):
    m = np.abs(as_float_array(d))
    return 2.0 * (LN2 - softplus(-m)) + 2.0 * np.exp(-m) * (LN2 - softplus(m))


# shared with SRKL, whose b is exactly JS4's a (and likewise their derivatives)
def _js_a(d):
    return 2.0 * (LN2 - softplus(-d))


def _js_a_prime(d):
    return 2.0 * sigmoid(-d)


def _js_dual(d):
    return _js_a(d), 2.0 * (softplus(d) - LN2), _js_a_prime(d), 2.0 * sigmoid(d)


# Jeffreys = (KL + RKL)/2: f(u) = (u - 1) log(u) / 2

def _jeffreys_f(u):
    return 0.5 * (u - 1.0) * np.log(u)


def _jeffreys_fp(u):
    return 0.5 * (np.log(u) + 1.0 - 1.0 / u)


def _jeffreys_fpp(u):
    return 0.5 * (1.0 / u + 1.0 / (u * u))


def _jeffreys_s(d):
    m = np.abs(as_float_array(d))
    return -0.5 * m * np.expm1(-m)


def _jeffreys_dual(d):
    return (
        0.5 * (d - np.expm1(-d)),
        0.5 * (d + np.expm1(d)),
        0.5 * (1.0 + np.exp(-d)),
        0.5 * (1.0 + np.exp(d)),
    )


# canonical Neymann chi^2: f(u) = (u - 2 + 1/u) / 2

def _neymann_f(u):
    return 0.5 * (u - 1.0) ** 2 / u


def _neymann_fp(u):
    return 0.5 * (1.0 - 1.0 / (u * u))


def _neymann_fpp(u):
    return 1.0 / (u * u * u)


def _neymann_s(d):
    return _piecewise(d, lambda t: 2.0 * np.sinh(0.5 * t) ** 2, lambda t: 0.5 * np.expm1(-t) ** 2)


def _neymann_dual(d):
    return -0.5 * np.expm1(-2.0 * d), -np.expm1(-d), np.exp(-2.0 * d), np.exp(-d)


# softened reverse KL = 4 KL((p+q)/2 || p)

def _srkl_f(u):
    return 2.0 * (1.0 + u) * np.log1p((1.0 - u) / (2.0 * u)) + 2.0 * (u - 1.0)


def _srkl_fp(u):
    return 2.0 * np.log1p((1.0 - u) / (2.0 * u)) + 2.0 * (1.0 - 1.0 / u)


def _srkl_fpp(u):
    return 2.0 / (u * u * (1.0 + u))


def _srkl_s(d):
    return _piecewise(
        d,
        lambda t: 2.0 * (1.0 + np.exp(t)) * (softplus(-t) - LN2) + 2.0 * np.expm1(t),
        lambda t: 2.0 * (1.0 + np.exp(-t)) * (softplus(-t) - LN2) - 2.0 * np.expm1(-t),
    )


def _srkl_dual(d):
    a = 2.0 * (softplus(-d) - LN2) - 2.0 * np.expm1(-d)
    a_prime = 2.0 * np.exp(-d) * sigmoid(-d)
    return a, _js_a(d), a_prime, _js_a_prime(d)


# IGOG, canonicalised: raw f''(u) = u^-2 - (1+u)^-2 has f''(1) = 3/4

_IGOG_SCALE = 4.0 / 3.0


def _igog_f(u):
    return _IGOG_SCALE * (0.5 * (u - 1.0) - np.log(u) + np.log1p(0.5 * (u - 1.0)))


def _igog_fp(u):
    return _IGOG_SCALE * (0.5 - 1.0 / u + 1.0 / (1.0 + u))


def _igog_fpp(u):
    return _IGOG_SCALE * (2.0 * u + 1.0) / (u * u * (1.0 + u) ** 2)


def _igog_s(d):
    c = _IGOG_SCALE
    return _piecewise(
        d,
        lambda t: c * (0.5 * np.expm1(t) + softplus(-t) - LN2),
        lambda t: c * (-0.5 * np.expm1(-t) + np.exp(-t) * (softplus(-t) - LN2)),
    )


def _igog_dual(d):
    c = _IGOG_SCALE
    sm = sigmoid(-d)
    return (
        c * (0.5 - np.exp(-d) * sm),
        c * (sigmoid(d) - 0.5 - softplus(-d) + LN2),
        c * (2.0 + np.exp(-d)) * sm * sm,
        c * (2.0 * np.exp(d) + 1.0) * sm * sm,
    )


_BUILTINS = {
    "KL": (_kl_f, _kl_fp, _kl_fpp, (1.0, 2.0), _kl_s, _kl_dual),
    "RKL": (_rkl_f, _rkl_fp, _rkl_fpp, (2.0, 1.0), _rkl_s, _rkl_dual),
    "JS4": (_js_f, _js_fp, _js_fpp, (1.0, 1.0), _js_s, _js_dual),
    "Jeffreys": (_jeffreys_f, _jeffreys_fp, _jeffreys_fpp, (2.0, 2.0), _jeffreys_s, _jeffreys_dual),
    "NeymannChi2": (_neymann_f, _neymann_fp, _neymann_fpp, (3.0, 0.0), _neymann_s, _neymann_dual),
    "SRKL": (_srkl_f, _srkl_fp, _srkl_fpp, (2.0, 0.0), _srkl_s, _srkl_dual),
    "IGOG": (_igog_f, _igog_fp, _igog_fpp, (2.0, 0.0), _igog_s, _igog_dual),
}

BUILTIN_NAMES = tuple(_BUILTINS)

_ALIASES = {
    "kl": "KL",
    "rkl": "RKL",
    "reverse-kl": "RKL",
    "js": "JS4",
    "js4": "JS4",
    "jensen-shannon": "JS4",
    "jeffreys": "Jeffreys",
    "neymannchi2": "NeymannChi2",
    "neymann": "NeymannChi2",
    "neyman": "NeymannChi2",
    "chi2": "NeymannChi2",
    "srkl": "SRKL",
    "softened-rkl": "SRKL",
    "igog": "IGOG",
}


def resolve_name(name: str) -> str:
    """Map a case-insensitive name or alias onto a built-in name."""
    if name in _BUILTINS:
        return name
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown divergence {name!r}; valid names: {', '.join(BUILTIN_NAMES)}"
        ) from None


def make_builtin(name: str) -> Divergence:
    """Return the canonical built-in divergence called ``name``.

    Valid names are ``KL, RKL, JS4, Jeffreys, NeymannChi2, SRKL, IGOG``
    (aliases such as ``js`` or ``srkl`` are accepted).
    """
    key = resolve_name(name)
    f, fp, fpp, tails, s, dual = _BUILTINS[key]
    return Divergence(key, f, fp, fpp, tails, Provenance.BUILTIN, s, dual)


# --------------------------------------------------------------------------
# pointwise evaluation


def _check_finite(name, values):
    for v in values:
        v = np.asarray(v)
        if np.any(np.isnan(v)):
            raise FloatingPointError(f"{name}: evaluator produced NaN")
        if np.any(np.isinf(v)):
            warnings.warn(f"{name}: evaluator saturated to infinity", DivergenceOverflowWarning, stacklevel=3)


def evaluate(div: Divergence, u) -> Evaluation:
    """Evaluate ``(f(u), f'(u), f''(u))``; ``u`` must be strictly positive."""
    arr = as_float_array(u)
    if np.any(~(arr > 0)):
        raise DomainError(f"defining functions are defined on u > 0, got {u!r}")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        vals = (div.f(arr), div.f_prime(arr), div.f_double_prime(arr))
    _check_finite(div.name, vals)
    return Evaluation(*(scalarize(v, u) for v in vals))


def dual_coords(div: Divergence, d) -> DualCoords:
    """Dual coordinates ``a_f, b_f`` and their ``d``-derivatives.

    ``d`` is clamped to ``[-D_CLAMP, D_CLAMP]``; ``clamped`` reports whether that
    happened anywhere.
    """
    arr = as_float_array(d)
    clamped = bool(np.any(np.abs(arr) > D_CLAMP))
    dc = np.clip(arr, -D_CLAMP, D_CLAMP)
    if div.dual is not None:
        a, b, ap, bp = div.dual(dc)
    else:
        u = np.exp(dc)
        fu, fpu, fppu = div.f(u), div.f_prime(u), div.f_double_prime(u)
        a, b, ap, bp = fpu, u * fpu - fu, u * fppu, u * u * fppu
    return DualCoords(
        scalarize(a, d), scalarize(b, d), scalarize(ap, d), scalarize(bp, d), clamped
    )


def _s_generic(div, d):
    arr = np.clip(as_float_array(d), -_S_GENERIC_LIMIT, _S_GENERIC_LIMIT)
    if np.any(np.abs(as_float_array(d)) > _S_GENERIC_LIMIT):
        warnings.warn(f"{div.name}: s_f argument clamped to +-{_S_GENERIC_LIMIT}", DivergenceOverflowWarning,
                      stacklevel=3)
    u = np.exp(arr)
    fu = div.f(u)
    return np.where(arr <= 0, fu, fu / u)


def s_curve(div: Divergence, d):
    """Symmetry-preserving curve: ``f(e^d)`` for ``d <= 0``, ``f(e^d)/e^d`` above."""
    if div.s is not None:
        out = div.s(as_float_array(d))
    else:
        out = _s_generic(div, d)
    return scalarize(out, d)


def f_of_log(div: Divergence, t):
    """``f(e^t)`` computed through ``s_f`` so large ``|t|`` stays finite where possible."""
    t = as_float_array(t)
    s = as_float_array(s_curve(div, t))
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(t <= 0, s, np.exp(np.maximum(t, 0.0)) * s)


# --------------------------------------------------------------------------
# divergences defined only through f''

_FPP_PROBE = np.logspace(-8, 8, 161)


def _quad(fn, lo, hi):
    val, _ = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=1e-12, limit=400)
    return val


def from_fpp(fpp: Evaluator, name: str) -> Divergence:
    """Build a divergence from its second derivative alone.

    ``f'`` and ``f`` are recovered by quadrature in log coordinates anchored at
    ``u = 1``.  With ``t = log v`` the two integrals are

        f'(u) = int_0^{log u} f''(e^t) e^t dt
        f(u)  = int_0^{log u} (u - e^t) f''(e^t) e^t dt

    and the dual coordinate ``b_f(d) = int_0^d f''(e^t) e^{2t} dt`` is
    integrated directly rather than by subtracting two large numbers.
    """
    with np.errstate(all="ignore"):
        probe = np.asarray(fpp(_FPP_PROBE), dtype=float)
    if not np.all(np.isfinite(probe)) or np.any(probe <= 0):
        raise ValueError(f"{name}: f'' must be finite and strictly positive on [1e-8, 1e8]")

    def kernel(t, power):
        return float(fpp(np.exp(t))) * np.exp(power * t)

    def a_scalar(t):
        return _quad(lambda x: kernel(x, 1), 0.0, t) if t != 0 else 0.0

    def b_scalar(t):
        return _quad(lambda x: kernel(x, 2), 0.0, t) if t != 0 else 0.0

    def f_scalar(u):
        if u == 1.0:
            return 0.0
        return _quad(lambda x: (u - np.exp(x)) * kernel(x, 1), 0.0, np.log(u))

    vec_a = np.vectorize(a_scalar, otypes=[float])
    vec_b = np.vectorize(b_scalar, otypes=[float])
    vec_f = np.vectorize(f_scalar, otypes=[float])

    def f(u):
        return vec_f(as_float_array(u))

    def f_prime(u):
        return vec_a(np.log(as_float_array(u)))

    def f_double_prime(u):
        return np.asarray(fpp(as_float_array(u)), dtype=float)

    def dual(d):
        u = np.exp(d)
        g = f_double_prime(u)
        return vec_a(d), vec_b(d), u * g, u * u * g

    return Divergence(name, f, f_prime, f_double_prime, None, Provenance.FROM_FPP, None, dual)
