import math

import numpy as np
import pytest

from pocmediate import LinearScmSpec, PnsQuery, decompose
from pocmediate import estimate as est
from pocmediate.errors import (
    ConfigError,
    InsufficientRows,
    NonBinaryOutcome,
    PerfectSeparation,
    RankDeficient,
    TooManyFailedResamples,
)
from pocmediate.estimate import (
    BootstrapConfig,
    Dataset,
    bootstrap_ci,
    estimate_decomposition,
    fit,
    fit_logistic,
    fit_ols,
    outcome_link,
)
from pocmediate.identify import THETA_KEYS
from pocmediate.model import ThetaArgs
from pocmediate.identify import theta_linear
from pocmediate.simulate import oracle_theta, sample_dataset


def _spec_from_fit(f, dim_c=1):
    p = f.params()
    return LinearScmSpec(
        dim_c=dim_c, a0=p.a0, a1=p.a1, a2=p.a2, a3=p.a3, a4=p.a4, b0=p.b0, b1=p.b1, b2=p.b2, b3=p.b3,
        g0=p.g0, g1=p.g1, g2=p.g2, sigma_y=p.sigma_y, sigma_m=p.sigma_m, sigma_n=p.sigma_n,
    )


# --------------------------------------------------------------------------- fitting


def test_noiseless_recovery():
    # each equation is checked on data where only its own noise is shrunk, so the
    # upstream variables keep enough variation for a full-rank design
    tiny = 1e-8
    cases = [(dict(sigma_m=tiny), "fit_m"), (dict(sigma_n=tiny), "fit_n"), (dict(sigma_y=tiny), "fit_y")]
    for kw, name in cases:
        reg = getattr(fit_ols(sample_dataset(LinearScmSpec(**kw), 500, seed=1)), name)
        assert reg.coef == pytest.approx(np.ones_like(reg.coef), abs=1e-4)
        assert reg.intercept == pytest.approx(0.0, abs=1e-4)
        assert reg.sd < 1e-6


def test_ols_matches_lstsq():
    ds = sample_dataset(LinearScmSpec(a0=0.5, b3=-2.0), 300, seed=2)
    f = fit_ols(ds)
    X = np.column_stack([np.ones(ds.n_obs), ds.x, ds.m, ds.n, ds.c])
    beta, res, *_ = np.linalg.lstsq(X, ds.y, rcond=None)
    assert f.fit_y.intercept == pytest.approx(beta[0], abs=1e-10)
    assert f.fit_y.coef == pytest.approx(beta[1:], abs=1e-10)
    assert f.fit_y.sd == pytest.approx(math.sqrt(res[0] / (ds.n_obs - X.shape[1])), rel=1e-10)
    assert f.fit_y.residuals == pytest.approx(ds.y - X @ beta, abs=1e-10)


def test_unit_model_sample_total_in_reference_interval(unit_model, q01):
    r = estimate_decomposition(sample_dataset(unit_model, 10000, seed=0), q01)
    assert 0.443 <= r.t_pns <= 0.455


def test_duplicate_treatment_is_rank_deficient():
    ds = sample_dataset(LinearScmSpec(), 200, seed=3)
    dup = Dataset(ds.columns + ("X2",), np.column_stack([ds.data, ds.column("X")]), ("X", "X2"),
                  "M", "N", "Y", ds.covariates)
    with pytest.raises(RankDeficient) as info:
        fit_ols(dup)
    assert info.value.regression == "M ~ X + C"


def test_too_few_rows():
    ds = sample_dataset(LinearScmSpec(), 6, seed=0)
    with pytest.raises(InsufficientRows):
        fit_ols(ds)


def test_constant_outcome_is_separation():
    ds = sample_dataset(LinearScmSpec(), 200, seed=4)
    data = ds.data.copy()
    data[:, ds.columns.index("Y")] = 1.0
    with pytest.raises(PerfectSeparation):
        fit_logistic(Dataset(ds.columns, data, ds.treatments, "M", "N", "Y", ds.covariates))


def test_separable_outcome_is_separation():
    ds = sample_dataset(LinearScmSpec(), 200, seed=4)
    data = ds.data.copy()
    data[:, ds.columns.index("Y")] = (ds.m > 0).astype(float)
    with pytest.raises(PerfectSeparation):
        fit_logistic(Dataset(ds.columns, data, ds.treatments, "M", "N", "Y", ds.covariates))


def test_non_binary_outcome():
    with pytest.raises(NonBinaryOutcome):
        fit_logistic(sample_dataset(LinearScmSpec(), 200, seed=5))


def test_logistic_recovers_scaled_coefficients():
    spec = LinearScmSpec(outcome_link="logistic", link_scale=1.0)
    fits = [fit_logistic(sample_dataset(spec, 20000, seed=s)) for s in range(6)]
    assert all(f.link == "logistic" and f.fit_y.sd is None for f in fits)
    assert np.mean([f.fit_y.coef for f in fits], axis=0) == pytest.approx(np.ones(4), abs=0.06)


def test_link_detection():
    lin = sample_dataset(LinearScmSpec(), 50, seed=0)
    binary = sample_dataset(LinearScmSpec(outcome_link="logistic"), 50, seed=0)
    assert outcome_link(lin) == "identity" and outcome_link(binary) == "logistic"
    with pytest.raises(ConfigError):
        fit(lin, link="probit")


def test_equal_treatments_give_zeros(unit_model):
    ds = sample_dataset(unit_model, 500, seed=7)
    r = estimate_decomposition(ds, PnsQuery(x=[0.4], x_prime=[0.4], y=0.0, c=[0.0]))
    assert r.as_array().tolist() == [0.0] * 7


def test_sum_identities_when_unclipped(unit_model, q01):
    for seed in range(10):
        r = estimate_decomposition(sample_dataset(unit_model, 1000, seed=seed), q01)
        t = [r.diagnostics.thetas[k] for k in THETA_KEYS]
        if not all(a >= b for a, b in zip(t, t[1:])):
            continue
        assert r.pns_xy + r.pns_xny + r.pns_xmny + r.pns_xmy == pytest.approx(r.t_pns, abs=1e-9)
        assert r.nd_pns == pytest.approx(r.pns_xy + r.pns_xny, abs=1e-9)
        assert r.ni_pns == pytest.approx(r.pns_xmny + r.pns_xmy, abs=1e-9)


def test_plug_in_consistency(unit_model, q01):
    truth = decompose(unit_model, q01).as_array()
    medians = []
    for n in (100, 1000, 10000):
        err = [np.abs(estimate_decomposition(sample_dataset(unit_model, n, seed=s), q01).as_array() - truth)
               for s in range(50)]
        medians.append(np.median(err, axis=0))
    assert np.all(medians[1] <= medians[0]) and np.all(medians[2] <= medians[1])


def test_parametric_self_consistency(unit_model):
    """Thetas of a fitted model agree with brute-force draws from that model."""
    spec = _spec_from_fit(fit_ols(sample_dataset(unit_model, 5000, seed=11)))
    n_mc = 10 ** 6
    for slots in [(0, 0, 0, 0), (0, 1, 0, 0), (0, 1, 0, 1), (0, 1, 1, 1), (1, 1, 1, 1)]:
        x, x1, x2, x3 = ([v] for v in slots)
        args = ThetaArgs(0.0, x, x1, x2, x3, [0.0])
        want = theta_linear(spec, args)
        se = math.sqrt(want * (1 - want) / n_mc)
        assert abs(oracle_theta(spec, args, n_mc=n_mc, seed=2) - want) <= 2 * se


# --------------------------------------------------------------------------- bootstrap


def test_single_resample_is_degenerate(unit_model, q01):
    ds = sample_dataset(unit_model, 300, seed=12)
    r = bootstrap_ci(ds, q01, BootstrapConfig(resamples=1, seed=4))
    idx = est.rng.stream(4, est.rng.BOOTSTRAP, 0).integers(0, ds.n_obs, ds.n_obs)
    single = estimate_decomposition(ds.take(idx), q01)
    for k, v in zip(r.ci, single.as_array()):
        assert r.ci[k] == (pytest.approx(v, abs=1e-15), pytest.approx(v, abs=1e-15))


def test_point_estimate_is_full_sample(unit_model, q01):
    ds = sample_dataset(unit_model, 300, seed=13)
    r = bootstrap_ci(ds, q01, BootstrapConfig(resamples=20, seed=1))
    assert r.as_array().tolist() == estimate_decomposition(ds, q01).as_array().tolist()


def test_bootstrap_independent_of_workers(unit_model, q01):
    ds = sample_dataset(unit_model, 400, seed=14)
    a = bootstrap_ci(ds, q01, BootstrapConfig(resamples=60, seed=9, workers=1))
    b = bootstrap_ci(ds, q01, BootstrapConfig(resamples=60, seed=9, workers=4))
    assert a.ci == b.ci


def test_bootstrap_brackets_point(unit_model, q01):
    for seed in range(5):
        ds = sample_dataset(unit_model, 2000, seed=100 + seed)
        r = bootstrap_ci(ds, q01, BootstrapConfig(resamples=200, seed=seed))
        for k, v in zip(r.ci, r.as_array()):
            lo, hi = r.ci[k]
            assert lo <= v <= hi


def test_failed_resamples_are_redrawn(unit_model, q01, monkeypatch):
    ds = sample_dataset(unit_model, 200, seed=15)
    real = est.estimate_decomposition
    calls = []

    def flaky(d, q, link="auto"):
        calls.append(1)
        if len(calls) > 1 and len(calls) % 2 == 0:
            raise RankDeficient("M ~ X + C")
        return real(d, q, link)

    monkeypatch.setattr(est, "estimate_decomposition", flaky)
    r = bootstrap_ci(ds, q01, BootstrapConfig(resamples=10, seed=0))
    assert r.ci is not None and len(calls) == 1 + 20


def test_too_many_failures(unit_model, q01, monkeypatch):
    ds = sample_dataset(unit_model, 200, seed=15)
    real = est.estimate_decomposition
    calls = []

    def failing(d, q, link="auto"):
        calls.append(1)
        if len(calls) > 1:
            raise RankDeficient("M ~ X + C")
        return real(d, q, link)

    monkeypatch.setattr(est, "estimate_decomposition", failing)
    with pytest.raises(TooManyFailedResamples):
        bootstrap_ci(ds, q01, BootstrapConfig(resamples=5, seed=0))
    assert len(calls) == 1 + 50


def test_bootstrap_config_validation():
    with pytest.raises(ConfigError):
        BootstrapConfig(resamples=0)
    with pytest.raises(ConfigError):
        BootstrapConfig(level=1.0)


# --------------------------------------------------------------------------- dataset


def test_dataset_roles_and_csv_round_trip(tmp_path):
    ds = sample_dataset(LinearScmSpec(dim_x=2, dim_c=2), 20, seed=0)
    assert ds.columns == ("C1", "C2", "X1", "X2", "M", "N", "Y")
    assert ds.x.shape == (20, 2) and ds.c.shape == (20, 2)
    text = ds.to_csv()
    rows = [line.split(",") for line in text.strip().split("\n")]
    assert tuple(rows[0]) == ds.columns
    assert np.array(rows[1:], dtype=float).tolist() == ds.data.tolist()
