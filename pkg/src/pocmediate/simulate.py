"""Sampling from a known model and brute-force counterfactual ground truth.

The oracle draws exogenous noise ``(U_Y, U_M, U_N)`` once per unit and pushes
the same draw through every intervention slot, so nested potential outcomes
of one unit are evaluated jointly.  Path categories are then read off the
event system directly; nothing here uses the identification formulas.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import logit

from . import _kernels, rng
from .errors import EvidenceStarvation
from .estimate import Dataset
from .model import LinearScmSpec, PnsDecomposition, PnsQuery, ThetaArgs, as_vector, validate_query

CHUNK = 1 << 16
MIN_MC = 1000
MIN_RETAINED = 100


def transform_y_noise(spec: LinearScmSpec, u: np.ndarray) -> np.ndarray:
    """Map standard-normal draws to the additive outcome noise.

    For the logistic link ``u`` is expected to be uniform on (0, 1) and the
    result is a standard logistic variate, so ``1{scale * lin + L > 0}`` is a
    Bernoulli draw with success probability ``sigmoid(scale * lin)``.
    """
    if spec.outcome_link == "logistic":
        return logit(u)
    s = spec.sigma_y * u
    if spec.noise_transform_y == "mix":
        a = spec.alpha_mix
        return a * s + (1.0 - a) * s ** 4
    return s


def _y_noise_draws(spec: LinearScmSpec, gen, size: int) -> np.ndarray:
    if spec.outcome_link == "logistic":
        return transform_y_noise(spec, rng.uniforms(gen, size))
    return transform_y_noise(spec, rng.std_normals(gen, size))


def _names(prefix: str, dim: int) -> list[str]:
    return [prefix] if dim == 1 else [f"{prefix}{i + 1}" for i in range(dim)]


def sample_dataset(spec: LinearScmSpec, n: int, seed: int = 0) -> Dataset:
    """Observational sample with columns C, X, M, N, Y.

    ``C`` and the treatment noise are standard normal, ``X = x_on_c @ C + U_X``;
    multi-dimensional treatments and covariates get numbered column names
    (``X1``, ``X2``, ...).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    p = spec.params()
    gen = rng.stream(seed, rng.SAMPLE, 0)
    uc = rng.std_normals(gen, (n, spec.dim_c))
    ux = rng.std_normals(gen, (n, spec.dim_x))
    um = rng.std_normals(gen, n)
    un = rng.std_normals(gen, n)
    ey = _y_noise_draws(spec, gen, n)

    c = uc
    x = c @ np.asarray(spec.x_on_c).T + ux if spec.dim_c else ux
    m = p.g0 + x @ p.g1 + (c @ p.g2 if spec.dim_c else 0.0) + p.sigma_m * um
    nn = p.b0 + x @ p.b1 + p.b2 * m + (c @ p.b3 if spec.dim_c else 0.0) + p.sigma_n * un
    lin = p.a0 + x @ p.a1 + p.a2 * m + p.a3 * nn + (c @ p.a4 if spec.dim_c else 0.0)
    if spec.outcome_link == "logistic":
        y = (spec.link_scale * lin + ey > 0.0).astype(float)
    else:
        y = lin + ey

    cx, cc = _names("X", spec.dim_x), _names("C", spec.dim_c)
    cols = [*cc, *cx, "M", "N", "Y"]
    data = np.column_stack([c, x, m, nn, y])
    return Dataset(tuple(cols), data, tuple(cx), "M", "N", "Y", tuple(cc))


# --------------------------------------------------------------------------- oracle


def _slot_terms(spec: LinearScmSpec, xs, c):
    """Per-treatment mediator means and intercept-plus-treatment terms."""
    p = spec.params()
    c = as_vector(c) if spec.dim_c else np.zeros(0)
    gc = float(p.g2 @ c) if spec.dim_c else 0.0
    bc = float(p.b3 @ c) if spec.dim_c else 0.0
    ac = float(p.a4 @ c) if spec.dim_c else 0.0
    mmean = np.array([p.g0 + float(p.g1 @ as_vector(x)) + gc for x in xs])
    nbase = np.array([p.b0 + float(p.b1 @ as_vector(x)) + bc for x in xs])
    ybase = np.array([p.a0 + float(p.a1 @ as_vector(x)) + ac for x in xs])
    return mmean, nbase, ybase


def _par(spec: LinearScmSpec, y: float, lo: float = -math.inf, hi: float = math.inf) -> np.ndarray:
    return np.array([spec.a2, spec.a3, spec.b2, spec.sigma_m, spec.sigma_n, spec.link_scale, y, lo, hi])


def _link_code(spec: LinearScmSpec) -> int:
    return _kernels.LINK_LOGISTIC if spec.outcome_link == "logistic" else _kernels.LINK_IDENTITY


def _chunk_draws(spec, seed, purpose, index, size):
    gen = rng.stream(seed, purpose, index)
    um = rng.std_normals(gen, size)
    un = rng.std_normals(gen, size)
    ey = _y_noise_draws(spec, gen, size)
    return ey, um, un


def _map_chunks(fn, n_mc: int, chunk: int, workers: int | None):
    jobs = list(rng.chunk_sizes(n_mc, chunk))
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda j: fn(*j), jobs))
    return [fn(i, s) for i, s in jobs]


def oracle_counts(spec: LinearScmSpec, query: PnsQuery, n_mc: int = 10 ** 6, seed: int = 0,
                  chunk: int = CHUNK, workers: int | None = None) -> np.ndarray:
    """Integer counts ``(XY, XNY, XMNY, XMY, not-T, retained)`` over ``n_mc`` draws."""
    if n_mc < MIN_MC:
        raise ValueError(f"n_mc must be >= {MIN_MC}")
    query = validate_query(spec, query)
    ev = query.evidence
    has_ev = not ev.empty
    xe = ev.x_e if has_ev else query.x
    mmean, nbase, ybase = _slot_terms(spec, (query.x_prime, query.x, xe), query.c)
    par = _par(spec, query.y, ev.lower, ev.upper)
    link = _link_code(spec)

    def run(index, size):
        ey, um, un = _chunk_draws(spec, seed, rng.ORACLE, index, size)
        return _kernels.classify_two(ey, um, un, mmean, nbase, ybase, par, link, has_ev, ev.closed)

    return np.sum(_map_chunks(run, n_mc, chunk, workers), axis=0)


def oracle_decompose(spec: LinearScmSpec, query: PnsQuery, n_mc: int = 10 ** 6, seed: int = 0,
                     chunk: int = CHUNK, workers: int | None = None) -> PnsDecomposition:
    """Monte Carlo ground truth for the seven PNS quantities.

    Each retained draw is classified into exactly one of XY, XNY, XMNY, XMY or
    not-T, so T equals the sum of the four path frequencies by construction.
    Evidence is imposed by rejection on the factual outcome at ``x_e``.

    Raises
    ------
    EvidenceStarvation
        Fewer than 100 draws satisfy the evidence.
    """
    counts = oracle_counts(spec, query, n_mc, seed, chunk, workers)
    retained = int(counts[5])
    if retained < MIN_RETAINED:
        raise EvidenceStarvation(retained, n_mc)
    xy, xny, xmny, xmy = (int(v) for v in counts[:4])
    f = 1.0 / retained
    flags = ("oracle", f"retained={retained}")
    return PnsDecomposition(
        t_pns=(xy + xny + xmny + xmy) * f,
        nd_pns=(xy + xny) * f,
        ni_pns=(xmny + xmy) * f,
        pns_xy=xy * f,
        pns_xny=xny * f,
        pns_xmny=xmny * f,
        pns_xmy=xmy * f,
        flags=flags,
    )


def oracle_theta(spec: LinearScmSpec, args: ThetaArgs, n_mc: int = 10 ** 6, seed: int = 0,
                 chunk: int = CHUNK, workers: int | None = None) -> float:
    """Frequency of ``Y_{x, M_{x'}, N_{x'', M_{x'''}}} < y`` with shared ``U_M``."""
    if n_mc < MIN_MC:
        raise ValueError(f"n_mc must be >= {MIN_MC}")
    mm, _, _ = _slot_terms(spec, (args.x_p, args.x_ppp), args.c)
    _, nb, _ = _slot_terms(spec, (args.x_pp,), args.c)
    _, _, yb = _slot_terms(spec, (args.x,), args.c)
    par = _par(spec, args.y)
    link = _link_code(spec)

    def run(index, size):
        ey, um, un = _chunk_draws(spec, seed, rng.ORACLE_THETA, index, size)
        return _kernels.count_below(ey, um, un, mm[0], mm[1], nb[0], yb[0], par, link)

    return sum(_map_chunks(run, n_mc, chunk, workers)) / n_mc


def potential_outcomes(spec: LinearScmSpec, query: PnsQuery, n: int, seed: int = 0) -> np.ndarray:
    """Joint draws of the five nested potential outcomes of the event system.

    Columns: ``Y_{x'}``, ``Y_{x', M_x, N_{x', M_{x'}}}``, ``Y_{x', M_x}``,
    ``Y_{x', M_x, N_{x, M_x}}``, ``Y_x``.
    """
    ey, um, un = _chunk_draws(spec, seed, rng.ORACLE, 0, n)
    mmean, nbase, ybase = _slot_terms(spec, (query.x_prime, query.x), query.c)
    a2, a3, b2 = spec.a2, spec.a3, spec.b2
    m_p = mmean[0] + spec.sigma_m * um
    m_x = mmean[1] + spec.sigma_m * um
    n_pp = nbase[0] + b2 * m_p + spec.sigma_n * un
    n_px = nbase[0] + b2 * m_x + spec.sigma_n * un
    n_xx = nbase[1] + b2 * m_x + spec.sigma_n * un
    lins = [
        ybase[0] + a2 * m_p + a3 * n_pp,
        ybase[0] + a2 * m_x + a3 * n_pp,
        ybase[0] + a2 * m_x + a3 * n_px,
        ybase[0] + a2 * m_x + a3 * n_xx,
        ybase[1] + a2 * m_x + a3 * n_xx,
    ]
    if spec.outcome_link == "logistic":
        return np.column_stack([(spec.link_scale * v + ey > 0).astype(float) for v in lins])
    return np.column_stack([v + ey for v in lins])


def ordering_is_constant(outcomes: np.ndarray) -> bool:
    """True when every row of ``outcomes`` sorts its columns the same way.

    Ties are broken by column index, so comonotone shifts of a common noise
    produce one pattern.
    """
    rounded = np.round(outcomes, 9)
    patterns = np.argsort(rounded, axis=1, kind="stable")
    return bool(np.all(patterns == patterns[0]))
