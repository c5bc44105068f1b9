"""Small numerically careful helpers shared across modules."""

import numpy as np
from scipy.special import expit, log_expit

LN2 = float(np.log(2.0))


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return expit(x)


def log_sigmoid(x):
    return log_expit(x)


def as_float_array(x):
    return np.asarray(x, dtype=np.float64)


def scalarize(value, like):
    """Return a Python float when the input ``like`` was a scalar."""
    if np.ndim(like) == 0:
        return float(value)
    return value


def gauss_legendre_panels(lo, hi, n_panels, order=12):
    """Nodes and weights of a composite Gauss-Legendre rule on [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights
