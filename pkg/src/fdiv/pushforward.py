"""Distributions of critic outputs under p and q, and divergences evaluated on them."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._numerics import as_float_array
from .core import Divergence, s_curve
from .distributions import Density, _quad_1d, gaussian_1d

__all__ = [
    "ClosedFormPushforward",
    "PushforwardHistogram",
    "divergence_from_pushforward",
    "gaussian_pushforward",
    "pushforward_empirical",
    "pushforward_gaussian_closed_form",
]


@dataclass(frozen=True)
class PushforwardHistogram:
    """Normalised histograms of ``d(x)`` for ``x ~ p`` and ``x ~ q`` on shared bins."""

    bin_edges: np.ndarray
    p_density: np.ndarray
    q_density: np.ndarray
    n_samples: int
    p_counts: np.ndarray
    q_counts: np.ndarray
    critic_label: str = "optimal"

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    def to_csv(self, path=None) -> str:
        lines = ["d_center,p_tilde,q_tilde"]
        lines += [f"{c!r},{a!r},{b!r}" for c, a, b in
                  zip(self.centers.tolist(), self.p_density.tolist(), self.q_density.tolist())]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "critic": self.critic_label,
            "n_samples": self.n_samples,
            "bin_edges": self.bin_edges.tolist(),
            "p_counts": self.p_counts.tolist(),
            "q_counts": self.q_counts.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PushforwardHistogram":
        edges = np.asarray(data["bin_edges"], dtype=float)
        pc, qc = np.asarray(data["p_counts"]), np.asarray(data["q_counts"])
        return _from_counts(edges, pc, qc, int(data["n_samples"]), data.get("critic", "optimal"))

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _from_counts(edges, pc, qc, n, label):
    w = np.diff(edges)
    return PushforwardHistogram(edges, pc / (pc.sum() * w), qc / (qc.sum() * w), n, pc, qc, label)


class ClosedFormPushforward(NamedTuple):
    p_tilde: Density
    q_tilde: Density


def _critic_label(critic) -> str:
    return str(getattr(critic, "label", type(critic).__name__))


def _fd_edges(values, lo, hi, max_bins=10_000):
    q75, q25 = np.percentile(values, [75, 25])
    width = 2.0 * (q75 - q25) / values.size ** (1.0 / 3.0)
    n = max_bins if width <= 0 else int(min(max_bins, max(1, np.ceil((hi - lo) / width))))
    return np.linspace(lo, hi, n + 1)


def pushforward_empirical(p: Density, q: Density, critic, n: int = 100_000, bins: int = 100,
                          seed: int = 0, binning: str = "uniform") -> PushforwardHistogram:
    """Histogram ``d(x)`` under ``n`` samples from each of ``p`` and ``q``.

    Bins cover the observed range of both sample sets padded by 5% on each
    side.  ``binning="fd"`` picks the bin count by the Freedman-Diaconis rule.
    """
    if binning == "uniform" and n < bins:
        raise ValueError("need at least as many samples as bins")
    sp, sq = np.random.SeedSequence(seed).spawn(2)
    dp = as_float_array(critic(p.sample(n, rng=np.random.default_rng(sp))))
    dq = as_float_array(critic(q.sample(n, rng=np.random.default_rng(sq))))
    both = np.concatenate([dp, dq])
    if not np.all(np.isfinite(both)):
        raise FloatingPointError("critic produced non-finite outputs")
    lo, hi = float(both.min()), float(both.max())
    span = hi - lo
    if span <= 1e-12 * max(1.0, abs(lo)):
        warnings.warn("critic outputs are constant; using a single unit-width bin", RuntimeWarning, stacklevel=2)
        edges = np.array([lo - 0.5, lo + 0.5])
    else:
        lo, hi = lo - 0.05 * span, hi + 0.05 * span
        if binning == "uniform":
            edges = np.linspace(lo, hi, bins + 1)
        elif binning == "fd":
            edges = _fd_edges(both, lo, hi)
        else:
            raise ValueError(f"unknown binning {binning!r}")
    pc, _ = np.histogram(dp, edges)
    qc, _ = np.histogram(dq, edges)
    return _from_counts(edges, pc, qc, n, _critic_label(critic))


def pushforward_gaussian_closed_form(sigma2: float) -> ClosedFormPushforward:
    """Pushforwards through ``d*`` of two Gaussians with shared covariance.

    ``sigma2`` is the squared Mahalanobis distance between the means;
    ``p~ = N(sigma2/2, sigma2)`` and ``q~ = N(-sigma2/2, sigma2)``.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    sd = float(np.sqrt(sigma2))
    return ClosedFormPushforward(gaussian_1d(0.5 * sigma2, sd), gaussian_1d(-0.5 * sigma2, sd))


def gaussian_pushforward(p: Density, q: Density) -> ClosedFormPushforward:
    """Closed-form pushforwards for single Gaussians with equal covariance."""
    if p.weights.size != 1 or q.weights.size != 1:
        raise ValueError("closed form needs single Gaussians")
    cov = p.covs[0]
    if not np.allclose(cov, q.covs[0], rtol=1e-12, atol=0):
        raise ValueError("closed form needs a shared covariance")
    delta = p.means[0] - q.means[0]
    return pushforward_gaussian_closed_form(float(delta @ np.linalg.solve(cov, delta)))


def _closed_form_integral(div, pair, form, epsabs):
    pt, qt = pair
    box = np.concatenate([pt.support_box(12.0)[0], qt.support_box(12.0)[0]])
    lo, hi = float(box.min()), float(box.max())
    pts = [0.0, float(pt.means[0, 0]), float(qt.means[0, 0])]

    def integrand(d):
        lp, lq = pt.log_density(d), qt.log_density(d)
        if form == "max":
            w = np.exp(max(lp, lq))
        else:
            w = np.exp(lq) if d < 0 else np.exp(lp)
        return 0.0 if w == 0.0 else w * float(s_curve(div, d))

    return _quad_1d(integrand, lo, hi, pts, epsabs, 1e-12, f"pushforward {div.name}")


def divergence_from_pushforward(div: Divergence, pushforward, form: str = "max", epsabs: float = 1e-12) -> float:
    """``integral of max(p~, q~) s_f(d) dd`` for a closed-form pair or a histogram.

    ``form="split"`` integrates ``q~ s_f`` over ``d < 0`` and ``p~ s_f`` over
    ``d > 0`` instead, which agrees with the max form whenever the pair comes
    from an optimal critic.  Histograms are treated as piecewise-constant
    densities, which makes the result a diagnostic rather than a consistent
    estimator when ``s_f`` grows quickly.
    """
    if form not in ("max", "split"):
        raise ValueError("form must be 'max' or 'split'")
    if isinstance(pushforward, PushforwardHistogram):
        c = pushforward.centers
        s = as_float_array(s_curve(div, c))
        if form == "max":
            w = np.maximum(pushforward.p_density, pushforward.q_density)
        else:
            w = np.where(c < 0, pushforward.q_density, pushforward.p_density)
        return float(np.sum(np.where(w > 0, w * s, 0.0) * pushforward.widths))
    return _closed_form_integral(div, ClosedFormPushforward(*pushforward), form, epsabs)
