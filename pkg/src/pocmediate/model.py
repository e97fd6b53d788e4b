"""Domain types shared across the package.

The two-mediator linear structural model is

    M := g0 + g1.x + g2.c + sigma_m U_M
    N := b0 + b1.x + b2 M + b3.c + sigma_n U_N
    Y := a0 + a1.x + a2 M + a3 N + a4.c + h(U_Y)

with ``h`` the identity scaled by ``sigma_y`` (or the ``mix`` transform), and for a
logistic outcome link ``P(Y = 1) = sigmoid(scale * (a0 + a1.x + a2 M + a3 N + a4.c))``.
Treatments ``x`` and covariates ``c`` are real vectors, mediators and outcome are scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyEvidenceInterval,
    NonPositiveSigma,
)

SCHEMA = "poc-mediate/v1"

COMPONENTS = ("t_pns", "nd_pns", "ni_pns", "pns_xy", "pns_xny", "pns_xmny", "pns_xmy")
PATHS = ("pns_xy", "pns_xny", "pns_xmny", "pns_xmy")

LINKS = ("identity", "logistic")
NOISES = ("identity", "mix")


def _vec(value, dim: int, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {arr.shape}")
    if arr.size == 1 and dim != 1:
        arr = np.full(dim, float(arr[0]))
    if arr.size != dim:
        raise DimensionMismatch(f"{name} has length {arr.size}, expected {dim}")
    return tuple(float(v) for v in arr)


def _opt_vec(value, name: str) -> tuple[float, ...]:
    if value is None:
        return ()
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {arr.shape}")
    return tuple(float(v) for v in arr)


class LinearParams(NamedTuple):
    """Identity-link parameter bundle consumed by the closed-form theta.

    Both a known :class:`LinearScmSpec` and a fitted :class:`MediationFit`
    reduce to this.
    """

    a0: float
    a1: np.ndarray
    a2: float
    a3: float
    a4: np.ndarray
    b0: float
    b1: np.ndarray
    b2: float
    b3: np.ndarray
    g0: float
    g1: np.ndarray
    g2: np.ndarray
    sigma_y: float
    sigma_m: float
    sigma_n: float


@dataclass(frozen=True)
class LinearScmSpec:
    """Coefficients and noise scales of the two-mediator structural model.

    Vector-valued coefficients (``a1``, ``a4``, ``b1``, ``b3``, ``g1``, ``g2``) are
    stored as tuples; scalars given for them are broadcast to the declared
    dimension.  ``x_on_c`` holds the treatment-assignment weights
    (``X := x_on_c @ C + U_X``); it only matters for sampling data and defaults
    to all ones, matching the simulation setting ``X := C + U_X``.
    """

    dim_x: int = 1
    dim_c: int = 1
    a0: float = 0.0
    a1: Any = 1.0
    a2: float = 1.0
    a3: float = 1.0
    a4: Any = 1.0
    b0: float = 0.0
    b1: Any = 1.0
    b2: float = 1.0
    b3: Any = 1.0
    g0: float = 0.0
    g1: Any = 1.0
    g2: Any = 1.0
    sigma_y: float = 1.0
    sigma_m: float = 1.0
    sigma_n: float = 1.0
    outcome_link: str = "identity"
    link_scale: float = 1.0
    noise_transform_y: str = "identity"
    alpha_mix: float = 1.0
    x_on_c: Any = None

    def __post_init__(self):
        if int(self.dim_x) < 1 or int(self.dim_c) < 0:
            raise DimensionMismatch("dim_x must be >= 1 and dim_c >= 0")
        set_ = object.__setattr__
        set_(self, "dim_x", int(self.dim_x))
        set_(self, "dim_c", int(self.dim_c))
        for name in ("a1", "b1", "g1"):
            set_(self, name, _vec(getattr(self, name), self.dim_x, name))
        for name in ("a4", "b3", "g2"):
            set_(self, name, _vec(getattr(self, name), self.dim_c, name) if self.dim_c else ())
        for name in ("a0", "a2", "a3", "b0", "b2", "g0", "sigma_y", "sigma_m", "sigma_n", "link_scale", "alpha_mix"):
            set_(self, name, float(getattr(self, name)))
        for name in ("sigma_y", "sigma_m", "sigma_n"):
            if not getattr(self, name) > 0:
                raise NonPositiveSigma(f"{name} must be > 0, got {getattr(self, name)}")
        if self.outcome_link not in LINKS:
            raise ConfigError(f"outcome_link must be one of {LINKS}")
        if self.noise_transform_y not in NOISES:
            raise ConfigError(f"noise_transform_y must be one of {NOISES}")
        if not 0.0 <= self.alpha_mix <= 1.0:
            raise ConfigError("alpha_mix must lie in [0, 1]")
        if self.x_on_c is None:
            w = np.ones((self.dim_x, self.dim_c))
        else:
            w = np.asarray(self.x_on_c, dtype=float).reshape(self.dim_x, self.dim_c)
        set_(self, "x_on_c", tuple(tuple(float(v) for v in row) for row in w))

    @property
    def monotone(self) -> bool:
        """True when the analytic identification assumptions hold by construction."""
        return self.noise_transform_y == "identity"

    def params(self) -> LinearParams:
        a = np.asarray
        return LinearParams(
            self.a0, a(self.a1), self.a2, self.a3, a(self.a4),
            self.b0, a(self.b1), self.b2, a(self.b3),
            self.g0, a(self.g1), a(self.g2),
            self.sigma_y, self.sigma_m, self.sigma_n,
        )

    def replace(self, **changes) -> "LinearScmSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        link = {"kind": self.outcome_link, "scale": self.link_scale}
        noise = {"kind": self.noise_transform_y, "alpha_mix": self.alpha_mix}
        return {
            "schema": SCHEMA,
            "kind": "linear-scm",
            "dim_x": self.dim_x,
            "dim_c": self.dim_c,
            "alpha": {"a0": self.a0, "a1": list(self.a1), "a2": self.a2, "a3": self.a3, "a4": list(self.a4)},
            "beta": {"b0": self.b0, "b1": list(self.b1), "b2": self.b2, "b3": list(self.b3)},
            "gamma": {"g0": self.g0, "g1": list(self.g1), "g2": list(self.g2)},
            "sigma": {"y": self.sigma_y, "m": self.sigma_m, "n": self.sigma_n},
            "x_on_c": [list(r) for r in self.x_on_c],
            "outcome_link": link,
            "noise_transform_y": noise,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearScmSpec":
        _check_schema(d)
        if d.get("kind", "linear-scm") != "linear-scm":
            raise ConfigError(f"expected kind 'linear-scm', got {d.get('kind')!r}")
        try:
            kw: dict = {"dim_x": d.get("dim_x", 1), "dim_c": d.get("dim_c", 1)}
            kw.update(d.get("alpha", {}))
            kw.update(d.get("beta", {}))
            kw.update(d.get("gamma", {}))
            sig = d.get("sigma", {})
            for k in ("y", "m", "n"):
                if k in sig:
                    kw[f"sigma_{k}"] = sig[k]
            if d.get("x_on_c") is not None and kw["dim_c"]:
                kw["x_on_c"] = d["x_on_c"]
            link = d.get("outcome_link", "identity")
            if isinstance(link, str):
                link = {"kind": link}
            kw["outcome_link"] = link.get("kind", "identity")
            kw["link_scale"] = link.get("scale", 1.0)
            noise = d.get("noise_transform_y", "identity")
            if isinstance(noise, str):
                noise = {"kind": noise}
            kw["noise_transform_y"] = noise.get("kind", "identity")
            kw["alpha_mix"] = noise.get("alpha_mix", 1.0)
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(f"bad spec document: {exc}") from exc


def _check_schema(d: dict):
    schema = d.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported schema {schema!r}; expected {SCHEMA!r}")


@dataclass(frozen=True)
class Evidence:
    """Post-treatment evidence ``X = x_e, Y in [lower, upper)`` (or closed).

    ``Evidence()`` is the empty evidence: the whole population.
    """

    x_e: tuple[float, ...] | None = None
    lower: float = -math.inf
    upper: float = math.inf
    closed: bool = False
    empty: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if self.x_e is not None:
            object.__setattr__(self, "x_e", _opt_vec(self.x_e, "x_e"))

    @classmethod
    def interval(cls, x_e, lower=-math.inf, upper=math.inf, closed=False) -> "Evidence":
        return cls(x_e=x_e, lower=lower, upper=upper, closed=closed, empty=False)

    def normalized(self) -> "Evidence":
        if self.empty:
            return Evidence(x_e=None, lower=-math.inf, upper=math.inf, closed=self.closed, empty=True)
        return self

    def to_dict(self) -> dict | None:
        if self.empty:
            return None
        return {
            "x_e": list(self.x_e) if self.x_e is not None else None,
            "lower": None if self.lower == -math.inf else self.lower,
            "upper": None if self.upper == math.inf else self.upper,
            "closure": "closed" if self.closed else "half-open",
        }

    @classmethod
    def from_dict(cls, d: dict | None) -> "Evidence":
        if not d:
            return cls()
        lo = d.get("lower")
        hi = d.get("upper")
        closure = d.get("closure", "half-open")
        if closure not in ("closed", "half-open"):
            raise ConfigError(f"closure must be 'closed' or 'half-open', got {closure!r}")
        return cls.interval(
            d.get("x_e"),
            -math.inf if lo is None else lo,
            math.inf if hi is None else hi,
            closed=closure == "closed",
        )


@dataclass(frozen=True)
class PnsQuery:
    """The tuple ``(y; x', x, evidence, c)`` indexing every PNS quantity."""

    x: tuple[float, ...]
    x_prime: tuple[float, ...]
    y: float
    c: tuple[float, ...] = ()
    evidence: Evidence = field(default_factory=Evidence)

    def __post_init__(self):
        object.__setattr__(self, "x", _opt_vec(self.x, "x"))
        object.__setattr__(self, "x_prime", _opt_vec(self.x_prime, "x_prime"))
        object.__setattr__(self, "c", _opt_vec(self.c, "c"))
        object.__setattr__(self, "y", float(self.y))

    def to_dict(self) -> dict:
        return {
            "x": list(self.x),
            "x_prime": list(self.x_prime),
            "y": self.y,
            "c": list(self.c),
            "evidence": self.evidence.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PnsQuery":
        try:
            return cls(
                x=d["x"], x_prime=d["x_prime"], y=d["y"], c=d.get("c", ()),
                evidence=Evidence.from_dict(d.get("evidence")),
            )
        except KeyError as exc:
            raise ConfigError(f"query is missing field {exc}") from exc


@dataclass(frozen=True)
class ThetaArgs:
    """Index ``(y; x, x', x'', x''', c)`` of the nested counterfactual
    ``Y_{x, M_{x'}, N_{x'', M_{x'''}}}``."""

    y: float
    x: tuple[float, ...]
    x_p: tuple[float, ...]
    x_pp: tuple[float, ...]
    x_ppp: tuple[float, ...]
    c: tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("x", "x_p", "x_pp", "x_ppp", "c"):
            object.__setattr__(self, name, _opt_vec(getattr(self, name), name))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True, eq=False)
class RegressionFit:
    """One fitted regression: intercept, slopes in design order, residual sd."""

    intercept: float
    coef: np.ndarray
    sd: float | None
    residuals: np.ndarray

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float)
        res = np.array(self.residuals, dtype=float)
        coef.flags.writeable = False
        res.flags.writeable = False
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "residuals", res)


@dataclass(frozen=True, eq=False)
class MediationFit:
    """Fitted parameters of M|X,C; N|X,M,C; Y|X,M,N,C.

    Slopes follow design order: ``fit_m`` over (X, C); ``fit_n`` over (X, M, C);
    ``fit_y`` over (X, M, N, C).  For ``link == "logistic"`` the outcome fit
    holds logistic coefficients and ``fit_y.sd`` is None.
    """

    fit_m: RegressionFit
    fit_n: RegressionFit
    fit_y: RegressionFit
    n_obs: int
    dim_x: int
    dim_c: int
    link: str = "identity"

    @property
    def monotone(self) -> bool:
        return True

    def params(self) -> LinearParams:
        dx = self.dim_x
        m, n, y = self.fit_m.coef, self.fit_n.coef, self.fit_y.coef
        return LinearParams(
            a0=self.fit_y.intercept, a1=y[:dx], a2=float(y[dx]), a3=float(y[dx + 1]), a4=y[dx + 2:],
            b0=self.fit_n.intercept, b1=n[:dx], b2=float(n[dx]), b3=n[dx + 1:],
            g0=self.fit_m.intercept, g1=m[:dx], g2=m[dx:],
            sigma_y=self.fit_y.sd if self.fit_y.sd is not None else float("nan"),
            sigma_m=self.fit_m.sd, sigma_n=self.fit_n.sd,
        )


@dataclass(frozen=True)
class GammaDelta:
    """Raw (unclipped) gamma values, the evidence mass delta, and the thetas used.

    ``thetas`` is keyed ``"x'x'x'x'"``, ``"x'xx'x'"``, ``"x'xx'x"``, ``"x'xxx"``,
    ``"xxxx"``; ``evid_lower``/``evid_upper`` are the evidence CDF values.
    """

    gamma1: float
    gamma2: float
    gamma3: float
    gamma4: float
    gamma_total: float
    delta: float
    thetas: dict
    evid_lower: float
    evid_upper: float

    def to_dict(self) -> dict:
        return {
            "gamma1": self.gamma1, "gamma2": self.gamma2, "gamma3": self.gamma3, "gamma4": self.gamma4,
            "gamma_total": self.gamma_total, "delta": self.delta,
            "thetas": dict(self.thetas), "evid_lower": self.evid_lower, "evid_upper": self.evid_upper,
        }


@dataclass(frozen=True)
class PnsDecomposition:
    """T-PNS, the ND/NI pair with respect to the first mediator, and the four
    path-specific components; optionally bootstrap CIs and diagnostics."""

    t_pns: float
    nd_pns: float
    ni_pns: float
    pns_xy: float
    pns_xny: float
    pns_xmny: float
    pns_xmy: float
    ci: dict | None = None
    diagnostics: GammaDelta | None = None
    flags: tuple[str, ...] = ()

    def components(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in COMPONENTS}

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in COMPONENTS])

    def with_ci(self, ci: dict) -> "PnsDecomposition":
        return replace(self, ci=ci)

    def to_dict(self) -> dict:
        out: dict = {"components": self.components()}
        out["ci"] = None if self.ci is None else {k: list(v) for k, v in self.ci.items()}
        out["diagnostics"] = None if self.diagnostics is None else self.diagnostics.to_dict()
        out["flags"] = list(self.flags)
        return out

    @classmethod
    def zeros(cls, **kw) -> "PnsDecomposition":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, **kw)


def _dims(model) -> tuple[int, int]:
    return model.dim_x, model.dim_c


def validate_query(model, query: PnsQuery) -> PnsQuery:
    """Check a query against a spec or fit and normalize its evidence.

    Raises
    ------
    DimensionMismatch
        Treatment, baseline, evidence-treatment or covariate lengths disagree with the model.
    EmptyEvidenceInterval
        ``lower > upper``, or a half-open interval with ``lower == upper``.
    NonPositiveSigma
        A fitted identity-link model has a non-positive residual sd.
    """
    dim_x, dim_c = _dims(model)
    for name, vec in (("x", query.x), ("x_prime", query.x_prime)):
        if len(vec) != dim_x:
            raise DimensionMismatch(f"{name} has length {len(vec)}, model dim_x is {dim_x}")
    if len(query.c) != dim_c:
        raise DimensionMismatch(f"c has length {len(query.c)}, model dim_c is {dim_c}")
    if math.isnan(query.y):
        raise ConfigError("outcome threshold y is NaN")

    if isinstance(model, MediationFit) and model.link == "identity":
        p = model.params()
        for name in ("sigma_y", "sigma_m", "sigma_n"):
            if not getattr(p, name) > 0:
                raise NonPositiveSigma(f"fitted {name} is {getattr(p, name)}")

    ev = query.evidence.normalized()
    if not ev.empty:
        if ev.x_e is None or len(ev.x_e) != dim_x:
            got = None if ev.x_e is None else len(ev.x_e)
            raise DimensionMismatch(f"evidence x_e has length {got}, model dim_x is {dim_x}")
        if ev.lower > ev.upper:
            raise EmptyEvidenceInterval(f"evidence lower bound {ev.lower} exceeds upper bound {ev.upper}")
        if ev.lower == ev.upper and not ev.closed:
            raise EmptyEvidenceInterval(f"half-open evidence interval [{ev.lower}, {ev.upper}) is empty")
    return replace(query, evidence=ev)


def as_vector(v: Sequence[float] | float) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))
