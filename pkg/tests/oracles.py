"""Reference computations that share no code with the package.

Closed forms go through ``math.erf``; Monte Carlo references use numpy's
default PCG64 generator and evaluate the structural equations literally,
one nested counterfactual at a time.
"""

import math

import numpy as np
from scipy import integrate


def phi(z):
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def unit_thetas():
    """The five thetas of the unit-coefficient model at x'=0, x=1, y=0, c=0."""
    s = math.sqrt(6.0)
    return [phi(-k / s) for k in range(5)]


def gammas_by_hand(t0, t1, t2, t3, t4, el=0.0, eu=1.0):
    return (
        min(t0, t2, t3, eu) - max(t4, el),
        min(t0, t2, eu) - max(t4, el, t3),
        min(t0, eu, t1) - max(t4, el, t2),
        min(t0, eu) - max(t4, t2, el, t1),
    )


class LinearModel:
    """Scalar-treatment, scalar-covariate linear SCM written out literally."""

    def __init__(self, a=(0, 1, 1, 1, 1), b=(0, 1, 1, 1), g=(0, 1, 1), s=(1, 1, 1),
                 noise="identity", alpha=1.0, logistic_scale=None):
        self.a, self.b, self.g, self.s = a, b, g, s
        self.noise, self.alpha, self.scale = noise, alpha, logistic_scale

    def f_m(self, x, c, um):
        g0, g1, g2 = self.g
        return g0 + g1 * x + g2 * c + self.s[1] * um

    def f_n(self, x, m, c, un):
        b0, b1, b2, b3 = self.b
        return b0 + b1 * x + b2 * m + b3 * c + self.s[2] * un

    def f_y(self, x, m, n, c, uy):
        a0, a1, a2, a3, a4 = self.a
        lin = a0 + a1 * x + a2 * m + a3 * n + a4 * c
        if self.scale is not None:
            return (uy < 1.0 / (1.0 + np.exp(-self.scale * lin))).astype(float)
        e = self.s[0] * uy
        if self.noise == "mix":
            e = self.alpha * e + (1 - self.alpha) * e ** 4
        return lin + e

    def draws(self, n, seed):
        r = np.random.default_rng(seed)
        um, un = r.standard_normal(n), r.standard_normal(n)
        uy = r.random(n) if self.scale is not None else r.standard_normal(n)
        return um, un, uy

    def nested(self, x, x1, x2, x3, c, um, un, uy):
        """Y_{x, M_{x1}, N_{x2, M_{x3}}} for every draw."""
        m1 = self.f_m(x1, c, um)
        m3 = self.f_m(x3, c, um)
        return self.f_y(x, m1, self.f_n(x2, m3, c, un), c, uy)

    def theta_mc(self, y, x, x1, x2, x3, c, n=10 ** 6, seed=0):
        um, un, uy = self.draws(n, seed)
        return float(np.mean(self.nested(x, x1, x2, x3, c, um, un, uy) < y))

    def events_mc(self, xp, x, y, c, n=10 ** 6, seed=0, evidence=None):
        """Frequencies (T, XY, XNY, XMNY, XMY) by the literal event definitions."""
        um, un, uy = self.draws(n, seed)
        po = lambda a, b, d, e: self.nested(a, b, d, e, c, um, un, uy)  # noqa: E731
        y_p = po(xp, xp, xp, xp)
        y_x = po(x, x, x, x)
        y_pmx = po(xp, x, xp, x)
        y_pmx_nx = po(xp, x, x, x)
        y_pmx_np = po(xp, x, xp, xp)
        keep = np.ones(n, dtype=bool)
        if evidence is not None:
            xe, lo, hi, closed = evidence
            ye = po(xe, xe, xe, xe)
            keep = (ye >= lo) & ((ye <= hi) if closed else (ye < hi))
        t = keep & (y_p < y) & (y_x >= y)
        k = keep.sum()
        xy = t & (y_pmx < y) & (y_pmx_nx < y)
        xny = t & (y_pmx < y) & (y_pmx_nx >= y)
        xmny = t & (y_pmx >= y) & (y_pmx_np < y)
        xmy = t & (y_pmx >= y) & (y_pmx_np >= y)
        return tuple(float(v.sum() / k) for v in (t, xy, xny, xmny, xmy))

    def theta_integral(self, y, x, x1, x2, x3, c):
        """Double integral over (U_M, U_N) of the Gaussian outcome CDF, via scipy."""
        a0, a1, a2, a3, a4 = self.a
        sy = self.s[0]

        def integrand(un, um):
            m1 = self.f_m(x1, c, um)
            n = self.f_n(x2, self.f_m(x3, c, um), c, un)
            z = (y - (a0 + a1 * x + a2 * m1 + a3 * n + a4 * c)) / sy
            dens = math.exp(-0.5 * (um * um + un * un)) / (2 * math.pi)
            return phi(z) * dens

        val, _ = integrate.dblquad(integrand, -9, 9, -9, 9, epsabs=1e-11, epsrel=1e-11)
        return val
