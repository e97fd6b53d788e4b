import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pocmediate import Evidence, LinearScmSpec, PnsDecomposition, PnsQuery, validate_query
from pocmediate.errors import (
    ConfigError,
    DimensionMismatch,
    EmptyEvidenceInterval,
    NonPositiveSigma,
)

finite = st.floats(-5, 5, allow_nan=False)
pos = st.floats(0.05, 5)


def test_query_dimension_agreement_accepted():
    spec = LinearScmSpec(dim_x=2)
    q = PnsQuery(x=[1, 2], x_prime=[0, 0], y=0.0, c=[0.0])
    assert validate_query(spec, q).x == (1.0, 2.0)


def test_query_dimension_mismatch_rejected():
    spec = LinearScmSpec(dim_x=2)
    with pytest.raises(DimensionMismatch):
        validate_query(spec, PnsQuery(x=[1], x_prime=[0, 0], y=0.0, c=[0.0]))
    with pytest.raises(DimensionMismatch):
        validate_query(LinearScmSpec(), PnsQuery(x=[1], x_prime=[0], y=0.0, c=[0.0, 1.0]))


def test_half_open_point_interval_is_empty():
    q = PnsQuery(x=[1], x_prime=[0], y=0.0, c=[0.0], evidence=Evidence.interval([0], 5, 5))
    with pytest.raises(EmptyEvidenceInterval):
        validate_query(LinearScmSpec(), q)


def test_closed_point_interval_is_accepted():
    q = PnsQuery(x=[1], x_prime=[0], y=0.0, c=[0.0], evidence=Evidence.interval([0], 5, 5, closed=True))
    assert validate_query(LinearScmSpec(), q).evidence.closed


def test_inverted_interval_rejected():
    q = PnsQuery(x=[1], x_prime=[0], y=0.0, c=[0.0], evidence=Evidence.interval([0], 2, 1))
    with pytest.raises(EmptyEvidenceInterval):
        validate_query(LinearScmSpec(), q)


def test_evidence_treatment_dimension_checked():
    q = PnsQuery(x=[1], x_prime=[0], y=0.0, c=[0.0], evidence=Evidence.interval([0, 1], 0, 1))
    with pytest.raises(DimensionMismatch):
        validate_query(LinearScmSpec(), q)


def test_empty_evidence_normalized_to_whole_line():
    ev = validate_query(LinearScmSpec(), PnsQuery(x=[1], x_prime=[0], y=0.0, c=[0.0])).evidence
    assert ev.empty and ev.lower == -math.inf and ev.upper == math.inf


def test_sigma_must_be_positive():
    with pytest.raises(NonPositiveSigma):
        LinearScmSpec(sigma_m=0.0)


def test_coefficient_length_checked():
    with pytest.raises(DimensionMismatch):
        LinearScmSpec(dim_x=2, a1=[1, 2, 3])
    assert LinearScmSpec(dim_x=3, a1=2.0).a1 == (2.0, 2.0, 2.0)


def test_bad_link_and_mix_rejected():
    with pytest.raises(ConfigError):
        LinearScmSpec(outcome_link="probit")
    with pytest.raises(ConfigError):
        LinearScmSpec(noise_transform_y="mix", alpha_mix=1.5)


def test_monotone_flag():
    assert LinearScmSpec().monotone
    assert not LinearScmSpec(noise_transform_y="mix", alpha_mix=0.5).monotone


def test_wrong_schema_rejected():
    with pytest.raises(ConfigError):
        LinearScmSpec.from_dict({"schema": "other/v9"})


@st.composite
def specs(draw):
    dx = draw(st.integers(1, 3))
    dc = draw(st.integers(0, 2))
    vec = lambda d: draw(st.lists(finite, min_size=d, max_size=d))  # noqa: E731
    link = draw(st.sampled_from(["identity", "logistic"]))
    noise = draw(st.sampled_from(["identity", "mix"]))
    return LinearScmSpec(
        dim_x=dx, dim_c=dc, a0=draw(finite), a1=vec(dx), a2=draw(finite), a3=draw(finite), a4=vec(dc),
        b0=draw(finite), b1=vec(dx), b2=draw(finite), b3=vec(dc), g0=draw(finite), g1=vec(dx), g2=vec(dc),
        sigma_y=draw(pos), sigma_m=draw(pos), sigma_n=draw(pos), outcome_link=link,
        link_scale=draw(pos), noise_transform_y=noise, alpha_mix=draw(st.floats(0, 1)),
        x_on_c=vec(dx * dc) if dc else None,
    )


@settings(max_examples=200, deadline=None)
@given(specs())
def test_spec_round_trip(spec):
    again = LinearScmSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again == spec


@st.composite
def queries(draw):
    dx = draw(st.integers(1, 3))
    dc = draw(st.integers(0, 2))
    vec = lambda d: draw(st.lists(finite, min_size=d, max_size=d))  # noqa: E731
    ev = Evidence()
    if draw(st.booleans()):
        lo = draw(st.one_of(st.just(-math.inf), finite))
        hi = draw(st.one_of(st.just(math.inf), finite))
        ev = Evidence.interval(vec(dx), lo, hi, closed=draw(st.booleans()))
    return PnsQuery(x=vec(dx), x_prime=vec(dx), y=draw(finite), c=vec(dc), evidence=ev)


@settings(max_examples=200, deadline=None)
@given(queries())
def test_query_round_trip(q):
    assert PnsQuery.from_dict(json.loads(json.dumps(q.to_dict()))) == q


def test_decomposition_helpers():
    d = PnsDecomposition(0.5, 0.2, 0.3, 0.1, 0.1, 0.1, 0.2)
    assert np.allclose(d.as_array(), [0.5, 0.2, 0.3, 0.1, 0.1, 0.1, 0.2])
    d2 = d.with_ci({k: (0.0, 1.0) for k in d.components()})
    assert d2.to_dict()["ci"]["t_pns"] == [0.0, 1.0]
    assert PnsDecomposition.zeros().t_pns == 0.0
