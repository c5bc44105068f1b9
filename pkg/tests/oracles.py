"""Independent reference computations, written without importing the package.

High-precision values come from mpmath using the closed-form defining
functions and textbook identities.  ``python3 tests/oracles.py`` prints the
values that are frozen into the test modules.
"""

import math

import mpmath as mp

mp.mp.dps = 40

# closed-form defining functions, written out independently of the package
F = {
    "KL": lambda u: u * mp.log(u) - u + 1,
    "RKL": lambda u: u - 1 - mp.log(u),
    "JS4": lambda u: 2 * u * mp.log(2 * u / (1 + u)) + 2 * mp.log(2 / (1 + u)),
    "Jeffreys": lambda u: ((u * mp.log(u) - u + 1) + (u - 1 - mp.log(u))) / 2,
    "NeymannChi2": lambda u: (u - 2 + 1 / u) / 2,
    "SRKL": lambda u: 2 * (1 + u) * mp.log((1 + u) / (2 * u)) + 2 * (u - 1),
}

FPP = {
    "KL": lambda u: 1 / u,
    "RKL": lambda u: 1 / u**2,
    "JS4": lambda u: 2 / (u * (1 + u)),
    "Jeffreys": lambda u: (1 / u + 1 / u**2) / 2,
    "NeymannChi2": lambda u: 1 / u**3,
    "SRKL": lambda u: 2 / (u**2 * (1 + u)),
    "IGOG": lambda u: mp.mpf(4) / 3 * (1 / u**2 - 1 / (1 + u) ** 2),
}


def f_by_integration(fpp, u):
    """f(u) = integral_1^u (u - t) f''(t) dt, anchored at f(1) = f'(1) = 0."""
    u = mp.mpf(u)
    return mp.quad(lambda t: (u - t) * fpp(t), [1, u])


def fprime_by_integration(fpp, u):
    return mp.quad(fpp, [1, mp.mpf(u)])


def igog_f(u):
    return f_by_integration(FPP["IGOG"], u)


def f_of(name, u):
    if name == "IGOG":
        return igog_f(u)
    return F[name](mp.mpf(u))


def s_curve(name, d):
    u = mp.e ** mp.mpf(d)
    v = f_of(name, u)
    return v if d <= 0 else v / u


def gaussian_divergence(name, m0, s0, m1, s1):
    """D_f(N(m0, s0^2), N(m1, s1^2)) = integral q f(p/q) by mpmath quadrature."""
    def pdf(x, m, s):
        return mp.exp(-((x - m) ** 2) / (2 * s**2)) / (s * mp.sqrt(2 * mp.pi))

    def integrand(x):
        p, q = pdf(x, m0, s0), pdf(x, m1, s1)
        if q == 0:
            return mp.mpf(0)
        return q * f_of(name, p / q)

    lo = min(m0 - 12 * s0, m1 - 12 * s1)
    hi = max(m0 + 12 * s0, m1 + 12 * s1)
    pts = sorted({lo, m0, m1, hi})
    return mp.quad(integrand, pts)


def kl_gauss_1d(m0, s0, m1, s1):
    return math.log(s1 / s0) + (s0**2 + (m0 - m1) ** 2) / (2 * s1**2) - 0.5


def bernoulli_kl(r, s):
    r, s = mp.mpf(r), mp.mpf(s)
    return r * mp.log(r / s) + (1 - r) * mp.log((1 - r) / (1 - s))


def mixture_logpdf_bimodal(x):
    x = mp.mpf(x)
    a = mp.mpf("0.5") * mp.exp(-(x**2) / (2 * mp.mpf("0.09"))) / (mp.mpf("0.3") * mp.sqrt(2 * mp.pi))
    b = mp.mpf("0.5") * mp.exp(-((x - 2) ** 2) / 2) / mp.sqrt(2 * mp.pi)
    return mp.log(a + b)


def rkl_diagonal_fit_variance(cov):
    """argmin over diagonal D of KL(N(0, D) || N(0, cov)) is D = 1/diag(cov^-1)."""
    a, b = cov[0]
    _, d = cov[1]
    det = a * d - b * b
    return (det / d, det / a)


def grid_search_rkl_diagonal(cov, lo=1.0, hi=3.0, n=20001):
    """Brute-force check of the same fit on a variance grid (both axes equal by symmetry)."""
    a, b = cov[0]
    _, d = cov[1]
    det = a * d - b * b
    inv = [[d / det, -b / det], [-b / det, a / det]]
    best = None
    for i in range(n):
        v = lo + (hi - lo) * i / (n - 1)
        kl = 0.5 * ((inv[0][0] + inv[1][1]) * v - 2 + math.log(det) - 2 * math.log(v))
        if best is None or kl < best[1]:
            best = (v, kl)
    return best[0]


def _main():
    print("KL f(e) =", mp.nstr(F["KL"](mp.e), 17))
    print("RKL evaluate(2) =", mp.nstr(F["RKL"](2), 17))
    print("SRKL a'(1) =", mp.nstr(2 * mp.e**-1 - 2 / (1 + mp.e), 17))
    print("RKL s(20) =", mp.nstr(s_curve("RKL", 20), 17))
    print("JS4 s(-20) =", mp.nstr(s_curve("JS4", -20), 17))
    print("from_fpp KL f(2) =", mp.nstr(f_by_integration(FPP["KL"], 2), 17))
    print("SRKL f(0.5) =", mp.nstr(F["SRKL"](mp.mpf("0.5")), 17))
    print("IGOG f at probes =", [mp.nstr(igog_f(u), 17) for u in (0.01, 0.5, 2, 100)])
    print("symmetrize(RKL) f(3) =", mp.nstr(mp.log(3), 17))
    print("mixture log density at 0 =", mp.nstr(mixture_logpdf_bimodal(0), 17))
    print("Bernoulli KL(0.5, 0.25) =", mp.nstr(bernoulli_kl(0.5, 0.25), 17))
    print("JS4 two-point limit 4 ln 2 =", mp.nstr(4 * mp.log(2), 17))
    print("JS4 loss at d=2 (NS) =", mp.nstr(-(2 * mp.log(1 / (1 + mp.e**-2)) + 2 * mp.log(2)), 17))
    print("JS4 a'(2) =", mp.nstr(2 / (1 + mp.e**2), 17))
    print("RKL diag fit variance =", rkl_diagonal_fit_variance([[5.5, 4.5], [4.5, 5.5]]))
    print("grid search RKL fit =", grid_search_rkl_diagonal([[5.5, 4.5], [4.5, 5.5]]))
    for name in list(F) + ["IGOG"]:
        print(f"{name} D(N(0,1), N(1,1)) =", mp.nstr(gaussian_divergence(name, 0, 1, 1, 1), 17))
    for name in list(F) + ["IGOG"]:
        print(f"{name} D(N(0,1), N(0.5,0.8)) =", mp.nstr(gaussian_divergence(name, 0, 1, 0.5, 0.8), 17))


if __name__ == "__main__":
    _main()
