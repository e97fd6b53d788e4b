"""Analytic identification of path-specific PNS.

A *theta engine* evaluates the conditional CDF of the nested counterfactual
``Y_{x, M_{x'}, N_{x'', M_{x'''}}}`` at a threshold ``y`` given covariates ``c``.
Engines:

* :class:`LinearTheta`: closed form for the linear-Gaussian model (known or fitted).
* :class:`LogisticTheta`: binary outcome, expectation over fitted residual pairs.
* :class:`QuadratureTheta`: Gauss-Hermite evaluation of the double integral over
  the mediators for any outcome CDF with Gaussian mediator noise.

:func:`decompose` turns five theta values plus the evidence CDF terms into the
seven PNS quantities.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import expit, ndtr, ndtri, roots_hermite

from . import _kernels
from .errors import (
    AssumptionViolation,
    EmptyResiduals,
    NonInvertibleCdf,
    PointEvidence,
    QuadratureDivergence,
    WrongLink,
)
from .model import (
    GammaDelta,
    LinearParams,
    LinearScmSpec,
    MediationFit,
    PnsDecomposition,
    PnsQuery,
    ThetaArgs,
    as_vector,
    validate_query,
)

POINT_DELTA = 1e-12

THETA_KEYS = ("x'x'x'x'", "x'xx'x'", "x'xx'x", "x'xxx", "xxxx")


# --------------------------------------------------------------------------- helpers


def _mediator_mean(p: LinearParams, x, c) -> float:
    return p.g0 + float(np.dot(p.g1, x)) + float(np.dot(p.g2, c))


def _nested_mean(p: LinearParams, args: ThetaArgs) -> float:
    x, x1, x2, x3, c = (as_vector(v) for v in (args.x, args.x_p, args.x_pp, args.x_ppp, args.c))
    m_first = _mediator_mean(p, x1, c)
    m_third = _mediator_mean(p, x3, c)
    n_mean = p.b0 + float(np.dot(p.b1, x2)) + p.b2 * m_third + float(np.dot(p.b3, c))
    return p.a0 + float(np.dot(p.a1, x)) + p.a2 * m_first + p.a3 * n_mean + float(np.dot(p.a4, c))


def nested_sd(p: LinearParams) -> float:
    return math.sqrt((p.a2 + p.a3 * p.b2) ** 2 * p.sigma_m ** 2 + p.a3 ** 2 * p.sigma_n ** 2 + p.sigma_y ** 2)


def _binary_cdf(y: float, p_zero: float, inclusive: bool) -> float:
    """CDF of a {0, 1} outcome at ``y``: P(Y < y), or P(Y <= y) when inclusive."""
    if inclusive:
        return 0.0 if y < 0 else (p_zero if y < 1 else 1.0)
    return 0.0 if y <= 0 else (p_zero if y <= 1 else 1.0)


def _params_of(model) -> LinearParams:
    return model if isinstance(model, LinearParams) else model.params()


def _link_of(model) -> str:
    if isinstance(model, LinearScmSpec):
        return model.outcome_link
    if isinstance(model, MediationFit):
        return model.link
    return "identity"


# --------------------------------------------------------------------------- theta


def theta_linear(model, args: ThetaArgs, inclusive: bool = False) -> float:
    """Closed-form theta for the identity-link linear-Gaussian model.

    ``Phi((y - mu) / s)`` with ``mu`` the nested mean and
    ``s^2 = (a2 + a3 b2)^2 sigma_m^2 + a3^2 sigma_n^2 + sigma_y^2``.
    ``inclusive`` is accepted for interface symmetry; it has no effect for a
    continuous outcome.
    """
    if _link_of(model) != "identity":
        raise WrongLink("theta_linear needs an identity outcome link")
    p = _params_of(model)
    return float(ndtr((args.y - _nested_mean(p, args)) / nested_sd(p)))


def theta_logistic(fit: MediationFit, args: ThetaArgs, inclusive: bool = False) -> float:
    """P(Y_{x, M_{x'}, N_{x'', M_{x'''}}} < y | c) for a logistic-outcome fit.

    The success probability is averaged over the fitted residual pairs
    ``(u_M, u_N)``, kept paired.  For a binary outcome the CDF is
    0 below 0, ``P(Y = 0)`` on (0, 1] and 1 above, so a query threshold of
    ``y = 1`` asks about the event ``Y = 1``.
    """
    if not isinstance(fit, MediationFit) or fit.link != "logistic":
        raise WrongLink("theta_logistic needs a logistic-link MediationFit")
    um, un = fit.fit_m.residuals, fit.fit_n.residuals
    if um.size == 0 or un.size == 0:
        raise EmptyResiduals("fit carries no residuals")
    if um.size != un.size:
        raise EmptyResiduals("mediator residual lists differ in length")
    p = fit.params()
    p_one = _kernels.mean_sigmoid(_nested_mean(p, args), p.a2 + p.a3 * p.b2, p.a3, um, un)
    return _binary_cdf(args.y, 1.0 - p_one, inclusive)


def quantile_map(m, x_prime, x_3p, c, cdf_of_M_given, quantile_of_M_given):
    """Transport a first-mediator value across worlds.

    Returns ``F^{-1}_{M | x''', c}(F_{M | x', c}(m))``: the value ``M_{x'''}``
    takes for the unit whose ``M_{x'}`` equals ``m``.  The accessors are
    ``cdf_of_M_given(x, c, m)`` and ``quantile_of_M_given(x, c, p)``; a
    non-finite quantile (flat CDF or a probability of exactly 0 or 1) raises
    :class:`NonInvertibleCdf`.
    """
    xp, x3 = as_vector(x_prime), as_vector(x_3p)
    if np.array_equal(xp, x3):
        return m
    prob = cdf_of_M_given(xp, c, m)
    out = quantile_of_M_given(x3, c, prob)
    if not np.all(np.isfinite(out)):
        raise NonInvertibleCdf("conditional mediator CDF is not invertible at the requested level")
    return out


def gaussian_mediator(params) -> tuple[Callable, Callable]:
    """CDF and quantile accessors of M | X, C for the linear-Gaussian mediator."""
    p = _params_of(params)

    def cdf(x, c, m):
        return ndtr((np.asarray(m) - _mediator_mean(p, as_vector(x), as_vector(c))) / p.sigma_m)

    def quantile(x, c, prob):
        return _mediator_mean(p, as_vector(x), as_vector(c)) + p.sigma_m * ndtri(prob)

    return cdf, quantile


def linear_outcome_cdf(params) -> Callable:
    p = _params_of(params)

    def cdf(y, x, m, n, c, inclusive=False):
        base = p.a0 + float(np.dot(p.a1, as_vector(x))) + float(np.dot(p.a4, as_vector(c)))
        return ndtr((y - base - p.a2 * m - p.a3 * n) / p.sigma_y)

    return cdf


def logistic_outcome_cdf(params, scale: float = 1.0) -> Callable:
    """Outcome CDF for ``P(Y = 1 | x, m, n, c) = sigmoid(scale * linear predictor)``."""
    p = _params_of(params)

    def cdf(y, x, m, n, c, inclusive=False):
        base = p.a0 + float(np.dot(p.a1, as_vector(x))) + float(np.dot(p.a4, as_vector(c)))
        p_zero = expit(-scale * (base + p.a2 * m + p.a3 * n))
        if inclusive:
            if y < 0:
                return np.zeros_like(p_zero)
            return p_zero if y < 1 else np.ones_like(p_zero)
        if y <= 0:
            return np.zeros_like(p_zero)
        return p_zero if y <= 1 else np.ones_like(p_zero)

    return cdf


@lru_cache(maxsize=32)
def _hermite(n: int):
    z, w = roots_hermite(n)
    return z, w


def _quad_once(outcome_cdf, p: LinearParams, args: ThetaArgs, n: int, inclusive: bool) -> float:
    z, w = _hermite(n)
    # far-tail nodes sit where the mediator CDF rounds to 1; their total weight is < 1e-13
    live = w > 1e-14 * w.max()
    z, w = z[live], w[live]
    x, xp, xpp, xppp, c = (as_vector(v) for v in (args.x, args.x_p, args.x_pp, args.x_ppp, args.c))
    m = _mediator_mean(p, xp, c) + math.sqrt(2.0) * p.sigma_m * z
    cdf_m, q_m = gaussian_mediator(p)
    m_moved = quantile_map(m, xp, xppp, c, cdf_m, q_m)
    n_mean = p.b0 + float(np.dot(p.b1, xpp)) + p.b2 * m_moved + float(np.dot(p.b3, c))
    nn = n_mean[:, None] + math.sqrt(2.0) * p.sigma_n * z[None, :]
    vals = np.asarray(outcome_cdf(args.y, x, m[:, None], nn, c, inclusive=inclusive), dtype=float)
    return float(w @ vals @ w / math.pi)


def theta_quadrature(outcome_cdf, params, args: ThetaArgs, nodes: int = 40,
                     tol: float = 1e-6, max_nodes: int = 256, inclusive: bool = False) -> float:
    """Gauss-Hermite evaluation of theta for Gaussian mediator noise.

    Integrates ``outcome_cdf(y, x, m, n, c)`` against the density of
    ``M | x', c`` and of ``N | x'', M_{x'''}, c``, with ``M_{x'''}`` obtained
    from ``m`` through :func:`quantile_map`.  The node count is doubled until
    successive results agree within ``tol``; :class:`QuadratureDivergence` is
    raised once the rule being refined exceeds ``max(max_nodes, nodes)``.
    """
    if nodes < 8:
        raise ValueError("at least 8 quadrature nodes are required")
    p = _params_of(params)
    if math.isinf(args.y):
        return 0.0 if args.y < 0 else 1.0
    n = nodes
    cap = max(max_nodes, nodes)
    prev = _quad_once(outcome_cdf, p, args, n, inclusive)
    while True:
        nxt = _quad_once(outcome_cdf, p, args, 2 * n, inclusive)
        if abs(nxt - prev) <= tol:
            return nxt
        n *= 2
        if n > cap:
            raise QuadratureDivergence(
                f"quadrature changed by {abs(nxt - prev):.3g} between {n // 2} and {n} nodes"
            )
        prev = nxt


# --------------------------------------------------------------------------- engines


class LinearTheta:
    """Closed-form theta on a known spec or a fitted identity-link model."""

    kind = "linear"

    def __init__(self, model):
        if _link_of(model) != "identity":
            raise WrongLink("LinearTheta needs an identity outcome link")
        self.params = _params_of(model)

    def __call__(self, y, x, x_p, x_pp, x_ppp, c, inclusive=False):
        if math.isinf(y):
            return 0.0 if y < 0 else 1.0
        return theta_linear(self.params, ThetaArgs(y, x, x_p, x_pp, x_ppp, c))


class LogisticTheta:
    kind = "logistic"

    def __init__(self, fit: MediationFit):
        if fit.link != "logistic":
            raise WrongLink("LogisticTheta needs a logistic fit")
        self.fit = fit

    def __call__(self, y, x, x_p, x_pp, x_ppp, c, inclusive=False):
        return theta_logistic(self.fit, ThetaArgs(y, x, x_p, x_pp, x_ppp, c), inclusive=inclusive)


class QuadratureTheta:
    kind = "quadrature"

    def __init__(self, outcome_cdf, params, nodes=40, tol=1e-6, max_nodes=256):
        self.outcome_cdf = outcome_cdf
        self.params = _params_of(params)
        self.nodes, self.tol, self.max_nodes = nodes, tol, max_nodes

    def __call__(self, y, x, x_p, x_pp, x_ppp, c, inclusive=False):
        return theta_quadrature(self.outcome_cdf, self.params, ThetaArgs(y, x, x_p, x_pp, x_ppp, c),
                                self.nodes, self.tol, self.max_nodes, inclusive=inclusive)


def make_engine(model):
    """Pick the theta engine appropriate for a spec or a fit."""
    if isinstance(model, MediationFit):
        return LogisticTheta(model) if model.link == "logistic" else LinearTheta(model)
    if isinstance(model, LinearScmSpec):
        if not model.monotone:
            raise AssumptionViolation(
                "the analytic engine requires an identity noise transform on Y; "
                "use the Monte Carlo oracle for this spec"
            )
        if model.outcome_link == "logistic":
            # steep sigmoids need a finer rule than the Gaussian default
            return QuadratureTheta(logistic_outcome_cdf(model, model.link_scale), model,
                                   nodes=64, tol=1e-7, max_nodes=1024)
        return LinearTheta(model)
    if callable(model):
        return model
    raise TypeError(f"cannot build a theta engine from {type(model).__name__}")


# --------------------------------------------------------------------------- decomposition


def _thetas(engine, q: PnsQuery) -> dict:
    x, xp, c, y = q.x, q.x_prime, q.c, q.y
    return {
        "x'x'x'x'": engine(y, xp, xp, xp, xp, c),
        "x'xx'x'": engine(y, xp, x, xp, xp, c),
        "x'xx'x": engine(y, xp, x, xp, x, c),
        "x'xxx": engine(y, xp, x, x, x, c),
        "xxxx": engine(y, x, x, x, x, c),
    }


def _evidence_cdfs(engine, q: PnsQuery) -> tuple[float, float]:
    ev = q.evidence
    if ev.empty:
        return 0.0, 1.0
    xe = ev.x_e
    lower = engine(ev.lower, xe, xe, xe, xe, q.c, inclusive=False)
    upper = engine(ev.upper, xe, xe, xe, xe, q.c, inclusive=ev.closed)
    return float(lower), float(upper)


def gammas_from_thetas(t: dict, el: float, eu: float) -> tuple[float, float, float, float, float]:
    """Unclipped gamma^1..gamma^4 and the T-PNS numerator from theta values."""
    t0, t1, t2, t3, t4 = (t[k] for k in THETA_KEYS)
    g1 = min(t0, t2, t3, eu) - max(t4, el)
    g2 = min(t0, t2, eu) - max(t4, el, t3)
    g3 = min(t0, eu, t1) - max(t4, el, t2)
    g4 = min(t0, eu) - max(t4, t2, el, t1)
    gt = min(t0, eu) - max(t4, el)
    return g1, g2, g3, g4, gt


def gamma_delta(engine, query: PnsQuery, allow_point: bool = False) -> GammaDelta:
    """Theta values, unclipped gammas and the evidence mass for a query.

    Evidence CDF terms ``P(Y < y^l | x_e, c)`` and ``P(Y < y^u | x_e, c)``
    (``<=`` at the upper end of a closed interval) are evaluated as theta with
    all four slots at ``x_e``.  With empty evidence they are 0 and 1.

    Raises :class:`PointEvidence` when the evidence mass is below 1e-12 unless
    ``allow_point`` is set.
    """
    t = _thetas(engine, query)
    el, eu = _evidence_cdfs(engine, query)
    g1, g2, g3, g4, gt = gammas_from_thetas(t, el, eu)
    delta = max(eu - el, 0.0)
    if delta < POINT_DELTA and not allow_point:
        raise PointEvidence(f"evidence interval has conditional mass {delta:.3g}")
    return GammaDelta(g1, g2, g3, g4, gt, delta, t, el, eu)


def point_indicators(t: dict, e: float) -> dict[str, bool]:
    """Path indicators when the evidence pins the outcome rank at level ``e``.

    Under comonotone potential outcomes the unit's common rank equals ``e``;
    each potential outcome falls below ``y`` exactly when ``e`` is below its
    theta.  These are the limits of the interval-evidence formulas as the
    interval shrinks to a point.
    """
    t0, t1, t2, t3, t4 = (t[k] for k in THETA_KEYS)
    total = t4 <= e < t0
    return {
        "t_pns": total,
        "pns_xy": total and e < t2 and e < t3,
        "pns_xny": total and e < t2 and t3 <= e,
        "pns_xmny": total and t2 <= e and e < t1,
        "pns_xmy": total and t2 <= e and t1 <= e,
    }


def point_evidence_indicators(engine, query: PnsQuery) -> dict[str, bool]:
    gd = gamma_delta(engine, query, allow_point=True)
    if gd.delta >= POINT_DELTA:
        raise ValueError("evidence interval has positive mass; use decompose")
    return point_indicators(gd.thetas, gd.evid_upper)


def _ordering_holds(t: dict, eps: float = 1e-12) -> bool:
    vals = [t[k] for k in THETA_KEYS]
    return all(a >= b - eps for a, b in zip(vals, vals[1:]))


def decompose(model, query: PnsQuery, engine=None) -> PnsDecomposition:
    """Seven PNS quantities for a query on a known spec or a fitted model.

    Path components are ``max(gamma^i / delta, 0)``; T-PNS is computed from
    its own min/max expression; ND and NI are the pairwise sums.  Zero-mass
    evidence routes to the indicator case.
    """
    if isinstance(model, (LinearScmSpec, MediationFit)):
        query = validate_query(model, query)
    if engine is None:
        engine = make_engine(model)
    gd = gamma_delta(engine, query, allow_point=True)

    flags = ["monotonicity-assumed"]
    if not _ordering_holds(gd.thetas):
        flags.append("theta-ordering-violated")

    if gd.delta < POINT_DELTA:
        ind = point_indicators(gd.thetas, gd.evid_upper)
        flags.append("point-evidence")
        vals = {k: float(v) for k, v in ind.items()}
    else:
        d = gd.delta
        vals = {
            "t_pns": gd.gamma_total / d,
            "pns_xy": gd.gamma1 / d,
            "pns_xny": gd.gamma2 / d,
            "pns_xmny": gd.gamma3 / d,
            "pns_xmy": gd.gamma4 / d,
        }
        vals = {k: min(max(v, 0.0), 1.0) for k, v in vals.items()}
    return PnsDecomposition(
        t_pns=vals["t_pns"],
        nd_pns=vals["pns_xy"] + vals["pns_xny"],
        ni_pns=vals["pns_xmny"] + vals["pns_xmy"],
        pns_xy=vals["pns_xy"],
        pns_xny=vals["pns_xny"],
        pns_xmny=vals["pns_xmny"],
        pns_xmy=vals["pns_xmy"],
        diagnostics=gd,
        flags=tuple(flags),
    )
