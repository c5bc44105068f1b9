"""Divergence surfaces over Gaussian generator parameters and trajectory overlays."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .core import Divergence
from .distributions import Density, FixedRule, QuadratureError, divergence_fixed_rule, divergence_quadrature, gaussian_1d

__all__ = ["GridSurface", "contour_grid", "overlay_trajectory"]

DEFAULT_MU_RANGE = (-1.0, 3.0)
DEFAULT_SIGMA_RANGE = (0.1, 3.0)
DEFAULT_RESOLUTION = (200, 200)


@dataclass
class GridSurface:
    """``values[i, j] = D(p, N(mu_axis[i], sigma_axis[j]^2))``."""

    mu_axis: np.ndarray
    sigma_axis: np.ndarray
    values: np.ndarray
    divergence_name: str
    failures: list = field(default_factory=list)

    @property
    def argmin(self):
        i, j = np.unravel_index(np.nanargmin(self.values), self.values.shape)
        return float(self.mu_axis[i]), float(self.sigma_axis[j]), float(self.values[i, j])

    def distance_to_argmin(self, mu: float, sigma: float) -> float:
        m, s, _ = self.argmin
        return float(np.hypot(mu - m, sigma - s))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("mu", "sigma", "value"))
        for i, mu in enumerate(self.mu_axis):
            for j, sg in enumerate(self.sigma_axis):
                w.writerow((repr(float(mu)), repr(float(sg)), repr(float(self.values[i, j]))))
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str, divergence_name: str = "") -> "GridSurface":
        rows = list(csv.DictReader(io.StringIO(text)))
        mus = np.array(sorted({float(r["mu"]) for r in rows}))
        sgs = np.array(sorted({float(r["sigma"]) for r in rows}))
        values = np.full((mus.size, sgs.size), np.nan)
        mi = {m: i for i, m in enumerate(mus)}
        si = {s: j for j, s in enumerate(sgs)}
        for r in rows:
            values[mi[float(r["mu"])], si[float(r["sigma"])]] = float(r["value"])
        return cls(mus, sgs, values, divergence_name)


def _column_rule(p: Density, mus, sigma):
    box = p.support_box(10.0)[0]
    lo = min(box[0], mus.min() - 10.0 * sigma)
    hi = max(box[1], mus.max() + 10.0 * sigma)
    p_sd = float(np.sqrt(np.min(p.covs[:, 0, 0])))
    return FixedRule(lo, hi, 0.5 * min(sigma, p_sd))


def contour_grid(div: Divergence, p: Density, mu_range=DEFAULT_MU_RANGE, sigma_range=DEFAULT_SIGMA_RANGE,
                 resolution=DEFAULT_RESOLUTION, backend: str = "fixed") -> GridSurface:
    """Evaluate ``D(p, N(mu, sigma^2))`` on a regular grid.

    ``backend="fixed"`` uses a composite Gauss-Legendre rule per sigma column
    with panels at most half the narrowest standard deviation in play;
    ``"quadrature"`` calls adaptive quadrature per cell (slow, for checking).
    Cells that fail are left as NaN and listed in ``failures``.
    """
    if p.dimensions != 1:
        raise ValueError("contour grids are over one-dimensional Gaussian generators")
    n_mu, n_sigma = (resolution, resolution) if np.ndim(resolution) == 0 else resolution
    if n_mu < 2 or n_sigma < 2:
        raise ValueError("resolution must be at least 2 per axis")
    if sigma_range[0] <= 0:
        raise ValueError("sigma_range must be positive")
    mus = np.linspace(*mu_range, int(n_mu))
    sigmas = np.linspace(*sigma_range, int(n_sigma))
    values = np.full((mus.size, sigmas.size), np.nan)
    failures = []
    if backend == "fixed":
        with np.errstate(all="ignore"):
            for j, sg in enumerate(sigmas):
                values[:, j] = divergence_fixed_rule(div, p, mus, sg, _column_rule(p, mus, sg))
        for i, j in zip(*np.nonzero(~np.isfinite(values))):
            failures.append((float(mus[i]), float(sigmas[j]), "non-finite value"))
            values[i, j] = np.nan
    elif backend == "quadrature":
        for i, mu in enumerate(mus):
            for j, sg in enumerate(sigmas):
                try:
                    values[i, j] = divergence_quadrature(div, p, gaussian_1d(mu, sg))
                except (QuadratureError, FloatingPointError) as exc:
                    failures.append((float(mu), float(sg), str(exc)))
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return GridSurface(mus, sigmas, values, div.name, failures)


def overlay_trajectory(surface: GridSurface, trace) -> dict:
    """Surface plus the trajectory of a training trace, ready for plotting."""
    path = [[r.mu, r.sigma] for r in trace.steps]
    mu, sigma = trace.final_params
    m, s, v = surface.argmin
    return {
        "schema_version": 1,
        "divergence": surface.divergence_name,
        "mu_axis": surface.mu_axis.tolist(),
        "sigma_axis": surface.sigma_axis.tolist(),
        "values": np.where(np.isfinite(surface.values), surface.values, None).tolist(),
        "argmin": {"mu": m, "sigma": s, "value": v},
        "trajectory": path,
        "final": [mu, sigma],
        "final_distance_to_argmin": surface.distance_to_argmin(mu, sigma),
    }
