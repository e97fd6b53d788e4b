import numpy as np
import pytest

from pocmediate import Evidence, LinearScmSpec, PnsQuery, ThetaArgs, _kernels
from pocmediate.simulate import oracle_counts, oracle_theta
from pocmediate.trimediator import TriScmSpec, tri_oracle_counts

numba_only = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _both(monkeypatch, name, call):
    fast = getattr(_kernels, f"{name}_numba")
    slow = getattr(_kernels, f"{name}_numpy")
    monkeypatch.setattr(_kernels, name, fast)
    a = call()
    monkeypatch.setattr(_kernels, name, slow)
    b = call()
    return a, b


TWO_CASES = [
    (LinearScmSpec(), PnsQuery(x=[1], x_prime=[0], y=0, c=[0])),
    (LinearScmSpec(a2=-0.5, b2=2.0), PnsQuery(x=[2], x_prime=[-1], y=0.4, c=[0.3])),
    (LinearScmSpec(), PnsQuery(x=[1], x_prime=[0], y=0, c=[0], evidence=Evidence.interval([0], 0.0, 1.5))),
    (LinearScmSpec(), PnsQuery(x=[1], x_prime=[0], y=0, c=[0],
                               evidence=Evidence.interval([0.5], -1.0, 0.5, closed=True))),
    (LinearScmSpec(noise_transform_y="mix", alpha_mix=0.5), PnsQuery(x=[1], x_prime=[0], y=0, c=[0])),
    (LinearScmSpec(outcome_link="logistic", link_scale=10.0), PnsQuery(x=[1], x_prime=[0], y=1, c=[0])),
]


@numba_only
@pytest.mark.parametrize("case", range(len(TWO_CASES)))
def test_two_mediator_counts_identical(monkeypatch, case):
    spec, q = TWO_CASES[case]
    a, b = _both(monkeypatch, "classify_two", lambda: oracle_counts(spec, q, n_mc=150_000, seed=case))
    assert a.tolist() == b.tolist()


@numba_only
@pytest.mark.parametrize("link", ["identity", "logistic"])
def test_theta_counts_identical(monkeypatch, link):
    spec = LinearScmSpec(outcome_link=link, link_scale=3.0)
    args = ThetaArgs(0.5, [1], [0], [1], [0], [0.2])
    a, b = _both(monkeypatch, "count_below", lambda: oracle_theta(spec, args, n_mc=100_000, seed=2))
    assert a == b


@numba_only
@pytest.mark.parametrize("evidence", [False, True])
def test_tri_counts_identical(monkeypatch, evidence):
    spec = TriScmSpec(m2_m1=0.5, m3_m2=-0.7, y_m2=2.0)
    ev = Evidence.interval([0], -1.0, 2.0) if evidence else Evidence()
    q = PnsQuery(x=[1], x_prime=[0], y=0, c=[0], evidence=ev)
    a, b = _both(monkeypatch, "classify_tri", lambda: tri_oracle_counts(spec, q, n_mc=100_000, seed=1))
    assert np.asarray(a).tolist() == np.asarray(b).tolist()


@numba_only
def test_mean_sigmoid_close():
    r = np.random.default_rng(0)
    um, un = r.standard_normal(5000), r.standard_normal(5000)
    a = _kernels.mean_sigmoid_numba(0.3, 2.0, -1.5, um, un)
    b = _kernels.mean_sigmoid_numpy(0.3, 2.0, -1.5, um, un)
    assert a == pytest.approx(b, rel=1e-12)


def test_backend_name():
    assert _kernels.backend() in ("numba", "numpy")
