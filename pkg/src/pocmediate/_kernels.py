"""Hot Monte Carlo kernels.

Each kernel has a pure-numpy implementation and, when numba is importable, an
``@njit`` twin with identical semantics.  The module-level names
(``classify_two``, ``count_below``, ``classify_tri``, ``mean_sigmoid``) point at
the numba versions unless ``POCMEDIATE_DISABLE_NUMBA`` is set to a truthy
value, or numba is missing.

Per-treatment constants are precomputed by the callers and passed in small
arrays indexed by treatment slot: 0 = baseline x', 1 = treated x, 2 = evidence x_e.
Category codes for the two-mediator classifier are 0 XY, 1 XNY, 2 XMNY, 3 XMY,
4 not T-PNS; the returned count vector has a sixth entry, the number of draws
retained by the evidence filter.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("POCMEDIATE_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes")

LINK_IDENTITY = 0
LINK_LOGISTIC = 1

# two-mediator parameter vector layout
P_A2, P_A3, P_B2, P_SM, P_SN, P_SCALE, P_Y, P_LO, P_HI = range(9)
# three-mediator parameter vector layout
T_E2, T_F2, T_F3, T_YA2, T_YA3, T_YA4, T_S1, T_S2, T_S3, T_Y, T_LO, T_HI = range(12)


# --------------------------------------------------------------------------- numpy


def _outcome_np(link, scale, lin, ey):
    if link == LINK_IDENTITY:
        return lin + ey
    return (scale * lin + ey > 0.0).astype(np.float64)


def _evidence_mask_np(y_e, lo, hi, closed):
    upper = y_e <= hi if closed else y_e < hi
    return (y_e >= lo) & upper


def classify_two_numpy(ey, um, un, mmean, nbase, ybase, par, link, has_evidence, closed):
    a2, a3, b2, sm, sn = par[P_A2], par[P_A3], par[P_B2], par[P_SM], par[P_SN]
    scale, y = par[P_SCALE], par[P_Y]

    m_p = mmean[0] + sm * um
    m_x = mmean[1] + sm * um
    n_pp = nbase[0] + b2 * m_p + sn * un
    n_xx = nbase[1] + b2 * m_x + sn * un
    n_px = nbase[0] + b2 * m_x + sn * un

    y_p = _outcome_np(link, scale, ybase[0] + a2 * m_p + a3 * n_pp, ey)
    y_x = _outcome_np(link, scale, ybase[1] + a2 * m_x + a3 * n_xx, ey)
    y_pmx = _outcome_np(link, scale, ybase[0] + a2 * m_x + a3 * n_px, ey)
    y_pmx_nx = _outcome_np(link, scale, ybase[0] + a2 * m_x + a3 * n_xx, ey)
    y_pmx_np = _outcome_np(link, scale, ybase[0] + a2 * m_x + a3 * n_pp, ey)

    if has_evidence:
        m_e = mmean[2] + sm * um
        n_e = nbase[2] + b2 * m_e + sn * un
        y_e = _outcome_np(link, scale, ybase[2] + a2 * m_e + a3 * n_e, ey)
        keep = _evidence_mask_np(y_e, par[P_LO], par[P_HI], closed)
    else:
        keep = np.ones(ey.shape, dtype=bool)

    t = (y_p < y) & (y <= y_x) & keep
    direct = y_pmx < y
    cat = np.full(ey.shape, 4, dtype=np.int64)
    cat[t & direct & (y_pmx_nx < y)] = 0
    cat[t & direct & (y_pmx_nx >= y)] = 1
    cat[t & ~direct & (y_pmx_np < y)] = 2
    cat[t & ~direct & (y_pmx_np >= y)] = 3
    counts = np.zeros(6, dtype=np.int64)
    counts[:5] = np.bincount(cat[keep], minlength=5)
    counts[5] = int(keep.sum())
    return counts


def count_below_numpy(ey, um, un, m1, m3, nbase, ybase, par, link):
    """Count draws with Y_{x, M_{x'}, N_{x'', M_{x'''}}} below the threshold.

    ``m1``/``m3`` are the mediator means under x' and x'''; ``nbase`` and
    ``ybase`` are the intercept-plus-treatment terms under x'' and x.
    """
    a2, a3, b2, sm, sn = par[P_A2], par[P_A3], par[P_B2], par[P_SM], par[P_SN]
    m_first = m1 + sm * um
    m_third = m3 + sm * um
    n = nbase + b2 * m_third + sn * un
    out = _outcome_np(link, par[P_SCALE], ybase + a2 * m_first + a3 * n, ey)
    return int(np.count_nonzero(out < par[P_Y]))


def classify_tri_numpy(ey, u1, u2, u3, m1mean, m2base, m3base, ybase, par, has_evidence, closed):
    e2, f2, f3 = par[T_E2], par[T_F2], par[T_F3]
    ya2, ya3, ya4 = par[T_YA2], par[T_YA3], par[T_YA4]
    s1, s2, s3, y = par[T_S1], par[T_S2], par[T_S3], par[T_Y]

    def m2(k, m1):
        return m2base[k] + e2 * m1 + s2 * u2

    def m3(k, m1, mm2):
        return m3base[k] + f2 * m1 + f3 * mm2 + s3 * u3

    def out(k, a, b, c):
        return ybase[k] + ya2 * a + ya3 * b + ya4 * c + ey

    m1p = m1mean[0] + s1 * u1
    m1x = m1mean[1] + s1 * u1
    m2_pp = m2(0, m1p)
    m2_xx = m2(1, m1x)
    m2_px = m2(0, m1x)
    y1 = out(0, m1p, m2_pp, m3(0, m1p, m2_pp))
    y2 = out(1, m1x, m2_xx, m3(1, m1x, m2_xx))
    m3a = m3(0, m1x, m2_px)
    y3 = out(0, m1x, m2_px, m3a)
    m3b = m3(0, m1x, m2_xx)
    y4 = out(0, m1x, m2_xx, m3b)
    y5 = out(0, m1x, m2_xx, m3(1, m1x, m2_xx))
    y6 = out(0, m1x, m2_px, m3b)
    m3d = m3(0, m1x, m2_pp)
    y7 = out(0, m1x, m2_pp, m3d)
    y8 = out(0, m1x, m2_pp, m3a)
    y9 = out(0, m1p, m2_pp, m3d)

    if has_evidence:
        m1e = m1mean[2] + s1 * u1
        m2e = m2(2, m1e)
        y_e = out(2, m1e, m2e, m3(2, m1e, m2e))
        keep = _evidence_mask_np(y_e, par[T_LO], par[T_HI], closed)
    else:
        keep = np.ones(ey.shape, dtype=bool)

    t = (y1 < y) & (y <= y2) & keep
    nd = y3 < y
    cat = np.full(ey.shape, 8, dtype=np.int64)
    a, b = nd & (y4 < y), nd & (y4 >= y)
    c, d = ~nd & (y7 < y), ~nd & (y7 >= y)
    cat[t & a & (y5 < y)] = 0
    cat[t & a & (y5 >= y)] = 1
    cat[t & b & (y6 < y)] = 2
    cat[t & b & (y6 >= y)] = 3
    cat[t & c & (y8 < y)] = 4
    cat[t & c & (y8 >= y)] = 5
    cat[t & d & (y9 < y)] = 6
    cat[t & d & (y9 >= y)] = 7
    counts = np.zeros(10, dtype=np.int64)
    counts[:9] = np.bincount(cat[keep], minlength=9)
    counts[9] = int(keep.sum())
    return counts


def mean_sigmoid_numpy(base, coef_m, coef_n, um, un):
    """Mean over residual pairs of sigmoid(base + coef_m*u_m + coef_n*u_n)."""
    z = base + coef_m * um + coef_n * un
    return float(np.mean(_sigmoid(z)))


def _sigmoid(z):
    # branch-free stable form
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


# --------------------------------------------------------------------------- numba

if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _outcome_nb(link, scale, lin, ey):
        if link == LINK_IDENTITY:
            return lin + ey
        return 1.0 if scale * lin + ey > 0.0 else 0.0

    @numba.njit(cache=True, nogil=True)
    def classify_two_numba(ey, um, un, mmean, nbase, ybase, par, link, has_evidence, closed):
        a2, a3, b2, sm, sn = par[P_A2], par[P_A3], par[P_B2], par[P_SM], par[P_SN]
        scale, y, lo, hi = par[P_SCALE], par[P_Y], par[P_LO], par[P_HI]
        counts = np.zeros(6, dtype=np.int64)
        for i in range(ey.shape[0]):
            e = ey[i]
            if has_evidence:
                m_e = mmean[2] + sm * um[i]
                n_e = nbase[2] + b2 * m_e + sn * un[i]
                y_e = _outcome_nb(link, scale, ybase[2] + a2 * m_e + a3 * n_e, e)
                if y_e < lo:
                    continue
                if closed:
                    if y_e > hi:
                        continue
                elif y_e >= hi:
                    continue
            counts[5] += 1
            m_p = mmean[0] + sm * um[i]
            m_x = mmean[1] + sm * um[i]
            n_pp = nbase[0] + b2 * m_p + sn * un[i]
            n_xx = nbase[1] + b2 * m_x + sn * un[i]
            y_p = _outcome_nb(link, scale, ybase[0] + a2 * m_p + a3 * n_pp, e)
            y_x = _outcome_nb(link, scale, ybase[1] + a2 * m_x + a3 * n_xx, e)
            if not (y_p < y and y <= y_x):
                counts[4] += 1
                continue
            n_px = nbase[0] + b2 * m_x + sn * un[i]
            y_pmx = _outcome_nb(link, scale, ybase[0] + a2 * m_x + a3 * n_px, e)
            if y_pmx < y:
                y_pmx_nx = _outcome_nb(link, scale, ybase[0] + a2 * m_x + a3 * n_xx, e)
                counts[0 if y_pmx_nx < y else 1] += 1
            else:
                y_pmx_np = _outcome_nb(link, scale, ybase[0] + a2 * m_x + a3 * n_pp, e)
                counts[2 if y_pmx_np < y else 3] += 1
        return counts

    @numba.njit(cache=True, nogil=True)
    def count_below_numba(ey, um, un, m1, m3, nbase, ybase, par, link):
        a2, a3, b2, sm, sn = par[P_A2], par[P_A3], par[P_B2], par[P_SM], par[P_SN]
        scale, y = par[P_SCALE], par[P_Y]
        total = 0
        for i in range(ey.shape[0]):
            m_first = m1 + sm * um[i]
            m_third = m3 + sm * um[i]
            n = nbase + b2 * m_third + sn * un[i]
            if _outcome_nb(link, scale, ybase + a2 * m_first + a3 * n, ey[i]) < y:
                total += 1
        return total

    @numba.njit(cache=True, nogil=True)
    def classify_tri_numba(ey, u1, u2, u3, m1mean, m2base, m3base, ybase, par, has_evidence, closed):
        e2, f2, f3 = par[T_E2], par[T_F2], par[T_F3]
        ya2, ya3, ya4 = par[T_YA2], par[T_YA3], par[T_YA4]
        s1, s2, s3, y, lo, hi = par[T_S1], par[T_S2], par[T_S3], par[T_Y], par[T_LO], par[T_HI]
        counts = np.zeros(10, dtype=np.int64)
        for i in range(ey.shape[0]):
            e = ey[i]
            if has_evidence:
                m1e = m1mean[2] + s1 * u1[i]
                m2e = m2base[2] + e2 * m1e + s2 * u2[i]
                m3e = m3base[2] + f2 * m1e + f3 * m2e + s3 * u3[i]
                y_e = ybase[2] + ya2 * m1e + ya3 * m2e + ya4 * m3e + e
                if y_e < lo:
                    continue
                if closed:
                    if y_e > hi:
                        continue
                elif y_e >= hi:
                    continue
            counts[9] += 1
            m1p = m1mean[0] + s1 * u1[i]
            m1x = m1mean[1] + s1 * u1[i]
            m2_pp = m2base[0] + e2 * m1p + s2 * u2[i]
            m2_xx = m2base[1] + e2 * m1x + s2 * u2[i]
            m2_px = m2base[0] + e2 * m1x + s2 * u2[i]
            y1 = ybase[0] + ya2 * m1p + ya3 * m2_pp + ya4 * (m3base[0] + f2 * m1p + f3 * m2_pp + s3 * u3[i]) + e
            y2 = ybase[1] + ya2 * m1x + ya3 * m2_xx + ya4 * (m3base[1] + f2 * m1x + f3 * m2_xx + s3 * u3[i]) + e
            if not (y1 < y and y <= y2):
                counts[8] += 1
                continue
            m3a = m3base[0] + f2 * m1x + f3 * m2_px + s3 * u3[i]
            y3 = ybase[0] + ya2 * m1x + ya3 * m2_px + ya4 * m3a + e
            if y3 < y:
                m3b = m3base[0] + f2 * m1x + f3 * m2_xx + s3 * u3[i]
                y4 = ybase[0] + ya2 * m1x + ya3 * m2_xx + ya4 * m3b + e
                if y4 < y:
                    m3c = m3base[1] + f2 * m1x + f3 * m2_xx + s3 * u3[i]
                    y5 = ybase[0] + ya2 * m1x + ya3 * m2_xx + ya4 * m3c + e
                    counts[0 if y5 < y else 1] += 1
                else:
                    y6 = ybase[0] + ya2 * m1x + ya3 * m2_px + ya4 * m3b + e
                    counts[2 if y6 < y else 3] += 1
            else:
                m3d = m3base[0] + f2 * m1x + f3 * m2_pp + s3 * u3[i]
                y7 = ybase[0] + ya2 * m1x + ya3 * m2_pp + ya4 * m3d + e
                if y7 < y:
                    y8 = ybase[0] + ya2 * m1x + ya3 * m2_pp + ya4 * m3a + e
                    counts[4 if y8 < y else 5] += 1
                else:
                    y9 = ybase[0] + ya2 * m1p + ya3 * m2_pp + ya4 * m3d + e
                    counts[6 if y9 < y else 7] += 1
        return counts

    @numba.njit(cache=True, nogil=True)
    def mean_sigmoid_numba(base, coef_m, coef_n, um, un):
        acc = 0.0
        for i in range(um.shape[0]):
            z = base + coef_m * um[i] + coef_n * un[i]
            if z >= 0:
                acc += 1.0 / (1.0 + np.exp(-z))
            else:
                ez = np.exp(z)
                acc += ez / (1.0 + ez)
        return acc / um.shape[0]

else:  # pragma: no cover
    classify_two_numba = count_below_numba = classify_tri_numba = mean_sigmoid_numba = None


def _select(fast, slow):
    return fast if USE_NUMBA else slow


classify_two = _select(classify_two_numba, classify_two_numpy)
count_below = _select(count_below_numba, count_below_numpy)
classify_tri = _select(classify_tri_numba, classify_tri_numpy)
mean_sigmoid = _select(mean_sigmoid_numba, mean_sigmoid_numpy)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
