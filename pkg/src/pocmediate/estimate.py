"""Plug-in estimation from tabular data.

Three regressions are fitted, ``M ~ X + C``, ``N ~ X + M + C`` and
``Y ~ X + M + N + C`` (logistic for a binary outcome), and the fitted
parameters are handed to the identification engine.  Confidence intervals come
from a nonparametric percentile bootstrap whose resamples are drawn from
counter-derived streams, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import expit, log_expit

from . import rng
from .errors import (
    ConfigError,
    DimensionMismatch,
    InsufficientRows,
    MissingColumn,
    NonBinaryOutcome,
    NonPositiveSigma,
    PerfectSeparation,
    QuadratureDivergence,
    RankDeficient,
    TooManyFailedResamples,
)
from .identify import decompose
from .model import COMPONENTS, MediationFit, PnsDecomposition, PnsQuery, RegressionFit

RANK_TOL = 1e-10
GRAD_TOL = 1e-8
MAX_NEWTON = 100
SEPARATION_LL = 1e-6

# failures that invalidate a single bootstrap resample rather than the whole run
RESAMPLE_FAILURES = (RankDeficient, InsufficientRows, PerfectSeparation, NonPositiveSigma, QuadratureDivergence)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Numeric table with causal roles.

    ``data`` is row-major with one column per entry of ``columns``.  Treatments
    and covariates may span several columns; each mediator and the outcome is
    a single column.
    """

    columns: tuple[str, ...]
    data: np.ndarray
    treatments: tuple[str, ...]
    mediator1: str
    mediator2: str
    outcome: str
    covariates: tuple[str, ...] = ()
    dropped_rows: int = 0

    def __post_init__(self):
        arr = np.array(self.data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != len(self.columns):
            raise DimensionMismatch(f"data has shape {arr.shape} for {len(self.columns)} columns")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "treatments", tuple(self.treatments))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if not self.treatments:
            raise ConfigError("at least one treatment column is required")
        for name in self.roles():
            if name not in self.columns:
                raise MissingColumn(f"column {name!r} is not in the dataset")

    def roles(self) -> list[str]:
        return [*self.treatments, self.mediator1, self.mediator2, self.outcome, *self.covariates]

    @property
    def n_obs(self) -> int:
        return self.data.shape[0]

    @property
    def dim_x(self) -> int:
        return len(self.treatments)

    @property
    def dim_c(self) -> int:
        return len(self.covariates)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise MissingColumn(f"column {name!r} is not in the dataset") from None

    def _block(self, names) -> np.ndarray:
        if not names:
            return np.empty((self.n_obs, 0))
        return np.column_stack([self.column(n) for n in names])

    @property
    def x(self) -> np.ndarray:
        return self._block(self.treatments)

    @property
    def c(self) -> np.ndarray:
        return self._block(self.covariates)

    @property
    def m(self) -> np.ndarray:
        return self.column(self.mediator1)

    @property
    def n(self) -> np.ndarray:
        return self.column(self.mediator2)

    @property
    def y(self) -> np.ndarray:
        return self.column(self.outcome)

    def take(self, rows) -> "Dataset":
        return Dataset(self.columns, self.data[np.asarray(rows)], self.treatments,
                       self.mediator1, self.mediator2, self.outcome, self.covariates)

    def to_csv(self, stream=None) -> str | None:
        """Write the table as CSV; returns the text when no stream is given."""
        out = stream if stream is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.data:
            w.writerow([repr(float(v)) for v in row])
        return out.getvalue() if stream is None else None


@dataclass(frozen=True)
class BootstrapConfig:
    resamples: int = 1000
    level: float = 0.95
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if int(self.resamples) < 1:
            raise ConfigError("bootstrap needs at least one resample")
        if not 0.0 < float(self.level) < 1.0:
            raise ConfigError("confidence level must lie in (0, 1)")


# --------------------------------------------------------------------------- regressions


def _with_intercept(design: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(design.shape[0]), design])


def _check_rank(X: np.ndarray, name: str):
    q, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    if d.size == 0 or d[-1] <= RANK_TOL * d[0]:
        raise RankDeficient(name)
    return q, r, piv


def _ols(design: np.ndarray, target: np.ndarray, name: str) -> RegressionFit:
    X = _with_intercept(design)
    n, p = X.shape
    q, r, piv = _check_rank(X, name)
    beta = np.empty(p)
    beta[piv] = linalg.solve_triangular(r, q.T @ target)
    resid = target - X @ beta
    sd = float(np.sqrt(resid @ resid / (n - p)))
    return RegressionFit(float(beta[0]), beta[1:], sd, resid)


def _logistic_loglik(X, y, beta):
    eta = X @ beta
    return float(np.sum(y * log_expit(eta) + (1.0 - y) * log_expit(-eta)))


def _logistic(design: np.ndarray, target: np.ndarray, name: str) -> RegressionFit:
    """Newton/IRLS with step halving; stops at gradient norm <= 1e-8."""
    vals = np.unique(target)
    if not np.all(np.isin(vals, (0.0, 1.0))):
        raise NonBinaryOutcome(f"outcome takes values outside {{0, 1}}: {vals[:5].tolist()}")
    if vals.size < 2:
        raise PerfectSeparation(f"outcome of regression {name!r} is constant")
    X = _with_intercept(design)
    _check_rank(X, name)
    beta = np.zeros(X.shape[1])
    ll = _logistic_loglik(X, target, beta)
    for _ in range(MAX_NEWTON):
        mu = expit(X @ beta)
        grad = X.T @ (target - mu)
        if np.linalg.norm(grad) <= GRAD_TOL:
            break
        w = mu * (1.0 - mu)
        hess = X.T @ (X * w[:, None])
        try:
            step = linalg.solve(hess, grad, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            raise PerfectSeparation(f"Newton system of regression {name!r} became singular") from None
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = _logistic_loglik(X, target, cand)
            if ll_new >= ll - 1e-12 * abs(ll) or t < 1e-10:
                break
            t *= 0.5
        beta, ll = cand, ll_new
        if not np.all(np.isfinite(beta)):
            raise PerfectSeparation(f"coefficients of regression {name!r} diverged")
    else:
        raise PerfectSeparation(
            f"regression {name!r} did not converge in {MAX_NEWTON} Newton steps (separated data?)"
        )
    # the gradient also vanishes as separated data push the likelihood to 1
    if ll > -SEPARATION_LL:
        raise PerfectSeparation(f"regression {name!r} fits every row exactly; the data are separated")
    # residuals on the response scale, kept for reporting only
    return RegressionFit(float(beta[0]), beta[1:], None, target - expit(X @ beta))


def _check_rows(ds: Dataset):
    p_max = 1 + ds.dim_x + 2 + ds.dim_c
    if ds.n_obs < p_max + 2:
        raise InsufficientRows(f"{ds.n_obs} rows; at least {p_max + 2} are needed for {p_max} outcome parameters")


def _mediator_fits(ds: Dataset):
    x, c, m, n = ds.x, ds.c, ds.m, ds.n
    fit_m = _ols(np.column_stack([x, c]), m, "M ~ X + C")
    fit_n = _ols(np.column_stack([x, m, c]), n, "N ~ X + M + C")
    return fit_m, fit_n


def fit_ols(ds: Dataset) -> MediationFit:
    """Least-squares fits of M|X,C; N|X,M,C; Y|X,M,N,C.

    Solved through a column-pivoted QR factorization; a diagonal entry of R
    below ``1e-10 * max|R_ii|`` is treated as rank deficiency.  Residual sds
    use the ``n - p`` denominator.

    Raises
    ------
    RankDeficient
        A design matrix is collinear; ``err.regression`` names it.
    InsufficientRows
        Fewer rows than outcome parameters plus two.
    """
    _check_rows(ds)
    fit_m, fit_n = _mediator_fits(ds)
    fit_y = _ols(np.column_stack([ds.x, ds.m, ds.n, ds.c]), ds.y, "Y ~ X + M + N + C")
    return MediationFit(fit_m, fit_n, fit_y, ds.n_obs, ds.dim_x, ds.dim_c, "identity")


def fit_logistic(ds: Dataset) -> MediationFit:
    """Least-squares mediator fits plus a logistic outcome regression.

    The mediator residual pairs are stored for the residual-averaged theta.
    """
    _check_rows(ds)
    fit_m, fit_n = _mediator_fits(ds)
    fit_y = _logistic(np.column_stack([ds.x, ds.m, ds.n, ds.c]), ds.y, "Y ~ X + M + N + C")
    return MediationFit(fit_m, fit_n, fit_y, ds.n_obs, ds.dim_x, ds.dim_c, "logistic")


def outcome_link(ds: Dataset) -> str:
    """``logistic`` when the outcome column only holds 0 and 1, else ``identity``."""
    return "logistic" if np.all(np.isin(ds.y, (0.0, 1.0))) else "identity"


def fit(ds: Dataset, link: str = "auto") -> MediationFit:
    if link == "auto":
        link = outcome_link(ds)
    if link == "logistic":
        return fit_logistic(ds)
    if link == "identity":
        return fit_ols(ds)
    raise ConfigError(f"unknown link {link!r}")


def estimate_decomposition(ds: Dataset, query: PnsQuery, link: str = "auto") -> PnsDecomposition:
    """Fit the regressions and decompose with the plug-in theta engine."""
    return decompose(fit(ds, link), query)


# --------------------------------------------------------------------------- bootstrap


def _resample(ds: Dataset, query: PnsQuery, link: str, seed: int, attempt: int):
    idx = rng.stream(seed, rng.BOOTSTRAP, attempt).integers(0, ds.n_obs, ds.n_obs)
    try:
        return estimate_decomposition(ds.take(idx), query, link).as_array()
    except RESAMPLE_FAILURES:
        return None


def bootstrap_ci(ds: Dataset, query: PnsQuery, config: BootstrapConfig = BootstrapConfig(),
                 link: str = "auto") -> PnsDecomposition:
    """Full-sample estimate with percentile bootstrap intervals.

    Attempt ``a`` resamples rows with the stream ``(seed, BOOTSTRAP, a)``; the
    first ``B`` successful attempts, in attempt order, enter the percentiles.
    Failed resamples are redrawn up to ``10 B`` attempts in total.
    """
    if link == "auto":
        link = outcome_link(ds)
    point = estimate_decomposition(ds, query, link)
    B = int(config.resamples)
    results: dict[int, np.ndarray] = {}
    next_attempt = 0
    pool = ThreadPoolExecutor(config.workers) if config.workers and config.workers > 1 else None
    try:
        while len(results) < B:
            want = B - len(results)
            batch = range(next_attempt, min(next_attempt + want, 10 * B))
            if not batch:
                raise TooManyFailedResamples(f"only {len(results)} of {B} resamples succeeded in {10 * B} attempts")
            if pool is None:
                out = [_resample(ds, query, link, config.seed, a) for a in batch]
            else:
                out = list(pool.map(lambda a: _resample(ds, query, link, config.seed, a), batch))
            for a, r in zip(batch, out):
                if r is not None:
                    results[a] = r
            next_attempt = batch.stop
    finally:
        if pool is not None:
            pool.shutdown()
    draws = np.vstack([results[a] for a in sorted(results)][:B])
    tail = (1.0 - config.level) / 2.0
    lo, hi = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    ci = {k: (float(np.clip(lo[i], 0, 1)), float(np.clip(hi[i], 0, 1))) for i, k in enumerate(COMPONENTS)}
    return point.with_ci(ci)
