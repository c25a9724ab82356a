import math

import numpy as np
import pytest

from conftest import make_params
from wdqlab.diffusion import (
    DiffusionSpec,
    fclt_check,
    simulate_ou,
    stationary_moments,
)
from wdqlab.fluid import fluid_v
from wdqlab.paths import Grid


def test_stationary_moments_examples():
    m, s2 = stationary_moments(1.0, 1.0, 1.0, 1.0, 2.0)
    assert (m, s2) == (2.0, 1.0)
    m0, _ = stationary_moments(1.0, 1.0, 1.0, 1.0, 0.0)
    assert m0 == 0.0
    _, s2_classic = stationary_moments(1.0, 2.0, 1.5, 0.0, 0.0)
    assert s2_classic == pytest.approx(1.5**2 / 4.0)
    with pytest.raises(ValueError):
        stationary_moments(1.0, 0.0, 1.0, 1.0, 0.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        DiffusionSpec(0.0, 1.0, 0.0, False, 0.0)
    with pytest.raises(ValueError):
        DiffusionSpec(0.0, 1.0, 1.0, True, -0.5)


def test_noiseless_ou_matches_fluid_closed_form():
    g = Grid(2.0, 2000)
    spec = DiffusionSpec(drift_eta=2.0, theta=1.0, sigma=1e-8, reflected=False, x0=0.5)
    ens = simulate_ou(spec, g, 2, seed=3)
    ref = fluid_v(2.0, 1.0, 0.5, g)
    # explicit Euler error O(dt) plus the vanishing noise
    assert np.max(np.abs(ens.values[0] - ref.values)) <= 2.0 * abs(spec.theta) ** 2 * 2.5 * g.dt * math.exp(2.0) + 1e-6


def test_ou_mean_constant_from_stationary_mean():
    eta, theta = 2.0, 1.0
    g = Grid(4.0, 400)
    spec = DiffusionSpec(drift_eta=eta, theta=theta, sigma=1.0, reflected=False, x0=eta / theta)
    ens = simulate_ou(spec, g, 4000, seed=4)
    for k in (100, 200, 400):
        marg = ens.values[:, k]
        se = marg.std(ddof=1) / math.sqrt(len(marg))
        assert abs(marg.mean() - eta / theta) <= 3 * se


def test_ou_stationary_variance_at_long_horizon():
    eta, theta, sigma = 0.0, 1.0, 1.0
    g = Grid(10.0, 1000)
    spec = DiffusionSpec(drift_eta=eta, theta=theta, sigma=sigma, reflected=False, x0=0.0)
    ens = simulate_ou(spec, g, 4000, seed=5)
    marg = ens.marginal()
    target = sigma**2 / (2 * theta)
    se_var = marg.var(ddof=1) * math.sqrt(2.0 / (len(marg) - 1))
    # Euler-Maruyama carries an O(dt) variance bias on top of sampling noise
    bias = target * theta * g.dt
    assert abs(marg.var(ddof=1) - target) <= 4 * se_var + bias


def test_reflected_ou_hugs_zero_under_negative_drift():
    spec = DiffusionSpec(drift_eta=-5.0, theta=0.0, sigma=0.5, reflected=True, x0=0.2)
    ens = simulate_ou(spec, Grid(1.0, 1000), 50, seed=6)
    assert np.min(ens.values) >= 0.0  # nonnegative by construction
    assert np.max(ens.values[:, 300:]) <= 0.5


def test_ensemble_memory_guard():
    with pytest.raises(ValueError, match="too large"):
        simulate_ou(
            DiffusionSpec(0.0, 1.0, 1.0, False, 0.0), Grid(1.0, 10**6), 10**3, seed=1
        )


def test_fclt_case_i_moments_match_stationary_targets():
    params = make_params(mu=1.0, theta=1.0, sigma_x=1.0, sigma_theta=1.0, w0=1.0, horizon=8.0)
    rep = fclt_check(params, eta=2.0, n=2000, t_eval=8.0, reps=1000, seed=7, case="i")
    assert rep.moments is not None
    assert abs(rep.moments.z_mean) <= 4.0
    assert abs(rep.moments.z_var) <= 4.0
    assert rep.moments.target_mean == 2.0
    assert rep.moments.target_var == 1.0


def test_fclt_case_i_two_sample_route():
    params = make_params(mu=1.0, theta=1.0, sigma_x=1.0, sigma_theta=1.0, w0=1.0, horizon=2.0)
    rep = fclt_check(
        params, eta=0.0, n=500, t_eval=2.0, reps=1500, seed=8, case="i",
        compare_to_stationary=False,
    )
    assert abs(rep.moments.z_mean) <= 4.0
    assert abs(rep.moments.z_var) <= 4.0
    assert rep.moments.ks_statistic is not None


def test_fclt_case_ii_reflected_limit_marginal():
    params = make_params(mu=0.0, theta=0.0, sigma_x=1.0, sigma_theta=0.0, w0=0.0, horizon=1.0)
    rep = fclt_check(params, eta=-1.0, n=1000, t_eval=1.0, reps=1500, seed=9, case="ii")
    assert abs(rep.moments.z_mean) <= 4.0
    assert abs(rep.moments.z_var) <= 4.0


def test_fclt_case_iii_sup_vanishes():
    params = make_params(mu=-1.0, theta=1.0, w0=0.0, horizon=1.0)
    probs_md = []
    probs_diff = []
    for n in (1000, 10000):
        rep = fclt_check(params, eta=0.0, n=n, t_eval=1.0, reps=400, seed=10, case="iii")
        probs_md.append(rep.sup_exceed_md)
        probs_diff.append(rep.sup_exceed_diffusion)
    assert probs_md[1] <= probs_md[0]
    assert probs_md[1] <= 0.01
    assert probs_diff[1] <= probs_diff[0] + 0.05


def test_fclt_case_i_regulator_asymptotically_inactive():
    fractions = []
    for n in (4, 64, 1024):
        params = make_params(mu=1.0, theta=1.0, sigma_x=1.0, sigma_theta=1.0, w0=1.0, horizon=2.0)
        rep = fclt_check(params, eta=0.0, n=n, t_eval=2.0, reps=400, seed=11, case="i",
                         compare_to_stationary=False)
        fractions.append(rep.regulator_active_fraction)
    assert fractions[0] >= fractions[1] >= fractions[2]
    assert fractions[2] <= 0.01


def test_fclt_rejects_mismatched_regimes():
    params = make_params(mu=1.0, theta=1.0)
    with pytest.raises(ValueError):
        fclt_check(params, eta=0.0, n=100, t_eval=1.0, reps=10, seed=1, case="iii")
    params0 = make_params(mu=0.0, theta=-1.0)
    with pytest.raises(ValueError):
        fclt_check(params0, eta=0.0, n=100, t_eval=1.0, reps=10, seed=1, case="ii")
