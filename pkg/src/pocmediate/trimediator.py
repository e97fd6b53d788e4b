"""Three causally ordered mediators, evaluated by Monte Carlo only.

Model (``M1 -> M2 -> M3``)::

    M1 := m1_0 + m1_x.x + m1_c.c + sigma_1 U_1
    M2 := m2_0 + m2_x.x + m2_m1 M1 + m2_c.c + sigma_2 U_2
    M3 := m3_0 + m3_x.x + m3_m1 M1 + m3_m2 M2 + m3_c.c + sigma_3 U_3
    Y  := y_0 + y_x.x + y_m1 M1 + y_m2 M2 + y_m3 M3 + y_c.c + sigma_y U_Y

No identification formula is attempted; the oracle classifies every draw into
one of eight path categories and the coarser quantities are exact sums of
those counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from . import _kernels, rng
from .errors import ConfigError, DimensionMismatch, EvidenceStarvation, NonPositiveSigma
from .model import SCHEMA, LinearScmSpec, PnsQuery, _check_schema, _vec, as_vector, validate_query
from .simulate import CHUNK, MIN_MC, MIN_RETAINED, _map_chunks

TRI_PATHS = (
    "pns_xy", "pns_xm3y", "pns_xm2y", "pns_xm2m3y",
    "pns_xm1m2y", "pns_xm1m2m3y", "pns_xm1y", "pns_xm1m3y",
)
TRI_AGGREGATES = ("agg_xy", "agg_xm2y", "agg_xm1m2y", "agg_xm1y")

_VEC_X = ("m1_x", "m2_x", "m3_x", "y_x")
_VEC_C = ("m1_c", "m2_c", "m3_c", "y_c")
_SCALARS = ("m1_0", "m2_0", "m2_m1", "m3_0", "m3_m1", "m3_m2", "y_0", "y_m1", "y_m2", "y_m3",
            "sigma_1", "sigma_2", "sigma_3", "sigma_y")


@dataclass(frozen=True)
class TriScmSpec:
    """Linear-Gaussian model with three causally ordered scalar mediators.

    Defaults are unit coefficients, zero intercepts and unit noise scales.
    """

    dim_x: int = 1
    dim_c: int = 1
    m1_0: float = 0.0
    m1_x: Any = 1.0
    m1_c: Any = 1.0
    m2_0: float = 0.0
    m2_x: Any = 1.0
    m2_m1: float = 1.0
    m2_c: Any = 1.0
    m3_0: float = 0.0
    m3_x: Any = 1.0
    m3_m1: float = 1.0
    m3_m2: float = 1.0
    m3_c: Any = 1.0
    y_0: float = 0.0
    y_x: Any = 1.0
    y_m1: float = 1.0
    y_m2: float = 1.0
    y_m3: float = 1.0
    y_c: Any = 1.0
    sigma_1: float = 1.0
    sigma_2: float = 1.0
    sigma_3: float = 1.0
    sigma_y: float = 1.0

    def __post_init__(self):
        if int(self.dim_x) < 1 or int(self.dim_c) < 0:
            raise DimensionMismatch("dim_x must be >= 1 and dim_c >= 0")
        set_ = object.__setattr__
        set_(self, "dim_x", int(self.dim_x))
        set_(self, "dim_c", int(self.dim_c))
        for name in _VEC_X:
            set_(self, name, _vec(getattr(self, name), self.dim_x, name))
        for name in _VEC_C:
            set_(self, name, _vec(getattr(self, name), self.dim_c, name) if self.dim_c else ())
        for name in _SCALARS:
            set_(self, name, float(getattr(self, name)))
        for name in ("sigma_1", "sigma_2", "sigma_3", "sigma_y"):
            if not getattr(self, name) > 0:
                raise NonPositiveSigma(f"{name} must be > 0, got {getattr(self, name)}")

    def replace(self, **changes) -> "TriScmSpec":
        return replace(self, **changes)

    def marginalize(self) -> LinearScmSpec:
        """Two-mediator model for ``(M1, M2)`` with ``M3`` folded into the outcome noise."""
        k = self.y_m3
        vx = lambda a, b: tuple(np.asarray(a) + k * np.asarray(b))  # noqa: E731
        return LinearScmSpec(
            dim_x=self.dim_x, dim_c=self.dim_c,
            a0=self.y_0 + k * self.m3_0,
            a1=vx(self.y_x, self.m3_x),
            a2=self.y_m1 + k * self.m3_m1,
            a3=self.y_m2 + k * self.m3_m2,
            a4=vx(self.y_c, self.m3_c) if self.dim_c else (),
            b0=self.m2_0, b1=self.m2_x, b2=self.m2_m1, b3=self.m2_c,
            g0=self.m1_0, g1=self.m1_x, g2=self.m1_c,
            sigma_y=math.hypot(self.sigma_y, k * self.sigma_3),
            sigma_m=self.sigma_1, sigma_n=self.sigma_2,
        )

    def total_effect_sd(self) -> float:
        """Standard deviation of the outcome noise after substituting all mediators."""
        d3 = self.y_m3
        d2 = self.y_m2 + d3 * self.m3_m2
        d1 = self.y_m1 + d2 * self.m2_m1 + d3 * self.m3_m1
        return math.sqrt((d1 * self.sigma_1) ** 2 + (d2 * self.sigma_2) ** 2
                         + (d3 * self.sigma_3) ** 2 + self.sigma_y ** 2)

    def to_dict(self) -> dict:
        out: dict = {"schema": SCHEMA, "kind": "tri-scm", "dim_x": self.dim_x, "dim_c": self.dim_c}
        for name in _SCALARS:
            out[name] = getattr(self, name)
        for name in _VEC_X + _VEC_C:
            out[name] = list(getattr(self, name))
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TriScmSpec":
        _check_schema(d)
        if d.get("kind", "tri-scm") != "tri-scm":
            raise ConfigError(f"expected kind 'tri-scm', got {d.get('kind')!r}")
        known = {"dim_x", "dim_c", *_SCALARS, *_VEC_X, *_VEC_C}
        unknown = set(d) - known - {"schema", "kind"}
        if unknown:
            raise ConfigError(f"unknown tri-scm fields: {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(frozen=True)
class TriDecomposition:
    """Eight path components, four ``(M1, M2)``-level aggregates, ND/NI with
    respect to ``M1`` and T, all as frequencies among retained draws.

    ``counts`` holds the raw integers: eight paths, not-T, retained.
    """

    counts: tuple[int, ...]

    @property
    def retained(self) -> int:
        return self.counts[9]

    def path_counts(self) -> dict[str, int]:
        return dict(zip(TRI_PATHS, self.counts[:8]))

    def aggregate_counts(self) -> dict[str, int]:
        c = self.counts
        return dict(zip(TRI_AGGREGATES, (c[0] + c[1], c[2] + c[3], c[4] + c[5], c[6] + c[7])))

    def _events(self, which: str) -> int:
        c = self.counts
        if which == "nd":
            return sum(c[:4])
        if which == "ni":
            return sum(c[4:8])
        return self.retained - c[8]

    def components(self) -> dict[str, float]:
        f = 1.0 / self.retained
        out = {k: v * f for k, v in self.path_counts().items()}
        out.update({k: v * f for k, v in self.aggregate_counts().items()})
        out["nd_pns"] = self._events("nd") * f
        out["ni_pns"] = self._events("ni") * f
        out["t_pns"] = self._events("t") * f
        return out

    def to_dict(self) -> dict:
        return {"components": self.components(), "counts": list(self.counts)}


def _tri_terms(spec: TriScmSpec, xs, c):
    c = as_vector(c) if spec.dim_c else np.zeros(0)

    def lin(intercept, wx, wc, x):
        return intercept + float(np.dot(wx, as_vector(x))) + (float(np.dot(wc, c)) if spec.dim_c else 0.0)

    m1 = np.array([lin(spec.m1_0, spec.m1_x, spec.m1_c, x) for x in xs])
    m2 = np.array([lin(spec.m2_0, spec.m2_x, spec.m2_c, x) for x in xs])
    m3 = np.array([lin(spec.m3_0, spec.m3_x, spec.m3_c, x) for x in xs])
    yb = np.array([lin(spec.y_0, spec.y_x, spec.y_c, x) for x in xs])
    return m1, m2, m3, yb


def tri_oracle_counts(spec: TriScmSpec, query: PnsQuery, n_mc: int = 10 ** 6, seed: int = 0,
                      chunk: int = CHUNK, workers: int | None = None) -> np.ndarray:
    if n_mc < MIN_MC:
        raise ValueError(f"n_mc must be >= {MIN_MC}")
    query = validate_query(spec, query)
    ev = query.evidence
    has_ev = not ev.empty
    xe = ev.x_e if has_ev else query.x
    m1, m2, m3, yb = _tri_terms(spec, (query.x_prime, query.x, xe), query.c)
    par = np.array([spec.m2_m1, spec.m3_m1, spec.m3_m2, spec.y_m1, spec.y_m2, spec.y_m3,
                    spec.sigma_1, spec.sigma_2, spec.sigma_3, query.y, ev.lower, ev.upper])

    def run(index, size):
        gen = rng.stream(seed, rng.TRI_ORACLE, index)
        u1 = rng.std_normals(gen, size)
        u2 = rng.std_normals(gen, size)
        u3 = rng.std_normals(gen, size)
        ey = spec.sigma_y * rng.std_normals(gen, size)
        return _kernels.classify_tri(ey, u1, u2, u3, m1, m2, m3, yb, par, has_ev, ev.closed)

    return np.sum(_map_chunks(run, n_mc, chunk, workers), axis=0)


def tri_oracle_decompose(spec: TriScmSpec, query: PnsQuery, n_mc: int = 10 ** 6, seed: int = 0,
                         chunk: int = CHUNK, workers: int | None = None) -> TriDecomposition:
    """Monte Carlo frequencies of the eight three-mediator path events.

    Raises
    ------
    EvidenceStarvation
        Fewer than 100 draws satisfy the evidence.
    """
    counts = tri_oracle_counts(spec, query, n_mc, seed, chunk, workers)
    if counts[9] < MIN_RETAINED:
        raise EvidenceStarvation(int(counts[9]), n_mc)
    return TriDecomposition(tuple(int(v) for v in counts))


def tri_event_counts(spec: TriScmSpec, query: PnsQuery, n: int = 10 ** 5, seed: int = 0) -> dict[str, int]:
    """Count every defined event separately, straight from its conjunction.

    Unlike the classifier this evaluates each of the fifteen events on its own,
    so the decomposition identities checked on these counts are not implied by
    the code structure.
    """
    query = validate_query(spec, query)
    ev = query.evidence
    xe = ev.x_e if not ev.empty else query.x
    m1b, m2b, m3b, yb = _tri_terms(spec, (query.x_prime, query.x, xe), query.c)
    gen = rng.stream(seed, rng.TRI_ORACLE, 0)
    u1, u2, u3 = (rng.std_normals(gen, n) for _ in range(3))
    ey = spec.sigma_y * rng.std_normals(gen, n)
    P, X, E = 0, 1, 2

    def m1(w):
        return m1b[w] + spec.sigma_1 * u1

    def m2(w, a):
        return m2b[w] + spec.m2_m1 * a + spec.sigma_2 * u2

    def m3(w, a, b):
        return m3b[w] + spec.m3_m1 * a + spec.m3_m2 * b + spec.sigma_3 * u3

    def out(w, a, b, c):
        return yb[w] + spec.y_m1 * a + spec.y_m2 * b + spec.y_m3 * c + ey

    def natural(w):
        a = m1(w)
        b = m2(w, a)
        return out(w, a, b, m3(w, a, b))

    y = query.y
    below = lambda v: v < y  # noqa: E731
    m1x, m1p = m1(X), m1(P)
    m2_x_m1x, m2_p_m1x, m2_p_m1p = m2(X, m1x), m2(P, m1x), m2(P, m1p)

    y_p, y_x = natural(P), natural(X)
    y_pm1x = out(P, m1x, m2_p_m1x, m3(P, m1x, m2_p_m1x))
    y_nd2 = out(P, m1x, m2_x_m1x, m3(P, m1x, m2_x_m1x))
    y_xy = out(P, m1x, m2_x_m1x, m3(X, m1x, m2_x_m1x))
    y_m2 = out(P, m1x, m2_p_m1x, m3(P, m1x, m2_x_m1x))
    y_ni2 = out(P, m1x, m2_p_m1p, m3(P, m1x, m2_p_m1p))
    y_m1m2 = out(P, m1x, m2_p_m1p, m3(P, m1x, m2_p_m1x))
    y_m1 = out(P, m1p, m2_p_m1p, m3(P, m1x, m2_p_m1p))

    if ev.empty:
        keep = np.ones(n, dtype=bool)
    else:
        ye = natural(E)
        keep = (ye >= ev.lower) & ((ye <= ev.upper) if ev.closed else (ye < ev.upper))

    t = keep & below(y_p) & ~below(y_x)
    nd = t & below(y_pm1x)
    ni = t & ~below(y_pm1x)
    agg = {
        "agg_xy": nd & below(y_nd2),
        "agg_xm2y": nd & ~below(y_nd2),
        "agg_xm1m2y": ni & below(y_ni2),
        "agg_xm1y": ni & ~below(y_ni2),
    }
    paths = {
        "pns_xy": agg["agg_xy"] & below(y_xy),
        "pns_xm3y": agg["agg_xy"] & ~below(y_xy),
        "pns_xm2y": agg["agg_xm2y"] & below(y_m2),
        "pns_xm2m3y": agg["agg_xm2y"] & ~below(y_m2),
        "pns_xm1m2y": agg["agg_xm1m2y"] & below(y_m1m2),
        "pns_xm1m2m3y": agg["agg_xm1m2y"] & ~below(y_m1m2),
        "pns_xm1y": agg["agg_xm1y"] & below(y_m1),
        "pns_xm1m3y": agg["agg_xm1y"] & ~below(y_m1),
    }
    counts = {k: int(v.sum()) for k, v in {**paths, **agg, "nd_pns": nd, "ni_pns": ni, "t_pns": t}.items()}
    counts["retained"] = int(keep.sum())
    return counts


def identity_checks(counts: dict[str, int]) -> dict[str, bool]:
    """The seven decomposition identities evaluated on integer event counts."""
    c = counts
    return {
        "agg_xy": c["agg_xy"] == c["pns_xy"] + c["pns_xm3y"],
        "agg_xm2y": c["agg_xm2y"] == c["pns_xm2y"] + c["pns_xm2m3y"],
        "agg_xm1m2y": c["agg_xm1m2y"] == c["pns_xm1m2y"] + c["pns_xm1m2m3y"],
        "agg_xm1y": c["agg_xm1y"] == c["pns_xm1y"] + c["pns_xm1m3y"],
        "nd_pns": c["nd_pns"] == c["agg_xy"] + c["agg_xm2y"],
        "ni_pns": c["ni_pns"] == c["agg_xm1m2y"] + c["agg_xm1y"],
        "t_pns": c["t_pns"] == c["nd_pns"] + c["ni_pns"],
    }
