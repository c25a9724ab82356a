import math

import numpy as np
import pytest

from conftest import make_params
from wdqlab.fluid import (
    classify_v,
    classify_w,
    fluid_convergence_report,
    fluid_v,
    fluid_w,
    hitting_time_w,
)
from wdqlab.paths import Grid, StepPath, sup_norm
from wdqlab.reflection import euler_error_bound, reflect_theta

SIGNS = [1.0, 0.0, -1.0]


def test_classify_w_full_table():
    # rows: theta > 0, = 0, < 0; columns: mu > 0, = 0, < 0
    expected = {
        (1.0, 1.0): 1.0,  # mu/theta
        (0.0, 1.0): 0.0,
        (-1.0, 1.0): 0.0,
        (1.0, 0.0): None,
        (0.0, 0.0): 0.0,
        (-1.0, 0.0): 0.0,
        (1.0, -1.0): None,
        (0.0, -1.0): None,
        (-1.0, -1.0): 0.0,
    }
    for (mu, theta), point in expected.items():
        cls = classify_w(mu, theta)
        assert cls.stable_point == point, (mu, theta)
        assert cls.stable is (point is not None)


def test_classify_w_examples():
    assert classify_w(1.0, 2.0).stable_point == pytest.approx(0.5)
    assert not classify_w(1.0, 0.0).stable
    assert classify_w(0.0, 0.0).stable_point == 0.0


def test_classify_w_underloaded_negative_theta_flags():
    cls = classify_w(-1.0, -2.0)
    assert cls.stable_point == 0.0
    assert cls.initial_condition_dependent
    assert cls.secondary_fixed_point == pytest.approx(0.5)


def test_classify_v_full_table():
    expected = {
        (1.0, 1.0): 1.0,
        (0.0, 1.0): 0.0,
        (-1.0, 1.0): -1.0,
        (1.0, 0.0): None,
        (0.0, 0.0): 0.0,
        (-1.0, 0.0): None,
        (1.0, -1.0): None,
        (0.0, -1.0): None,
        (-1.0, -1.0): None,
    }
    for (mu, theta), point in expected.items():
        assert classify_v(mu, theta).stable_point == point, (mu, theta)


def test_classify_v_examples():
    assert classify_v(-1.0, 2.0).stable_point == pytest.approx(-0.5)
    assert not classify_v(-1.0, 0.0).stable
    assert classify_v(0.0, 1.0).stable_point == 0.0


def test_fluid_w_overloaded_closed_form():
    g = Grid(2.0, 1000)
    path = fluid_w(1.0, 2.0, 0.0, g)
    expected = 0.5 * (1.0 - np.exp(-2.0 * g.times()))
    assert np.allclose(path.values, expected, atol=1e-14)


def test_fluid_w_hitting_time_example():
    t0 = hitting_time_w(-1.0, 1.0, 2.0)
    assert t0 == pytest.approx(math.log(3.0), abs=1e-12)
    g = Grid(2.0, 20000)
    path = fluid_w(-1.0, 1.0, 2.0, g)
    first_zero = np.argmax(path.values <= 1e-10) * g.dt
    assert abs(first_zero - t0) <= g.dt
    assert np.all(path.values[int(t0 / g.dt) + 1 :] == 0.0)


def test_fluid_w_zero_start_critical():
    g = Grid(1.0, 10)
    for theta in SIGNS:
        assert sup_norm(fluid_w(0.0, theta, 0.0, g)) == 0.0


def test_fluid_w_nonnegative_everywhere():
    g = Grid(3.0, 300)
    for mu in (-2.0, -0.5, 0.0, 0.5):
        for theta in (-1.0, 0.0, 1.5):
            w0 = 0.3 if not (mu < 0 and theta < 0) else min(0.3, mu / theta / 2)
            assert fluid_w(mu, theta, w0, g).is_nonnegative()


def test_fluid_v_examples():
    g = Grid(1.0, 100)
    const = fluid_v(2.0, 4.0, 0.5, g)
    assert np.allclose(const.values, 0.5, atol=1e-15)
    ramp = fluid_v(3.0, 0.0, -1.0, g)
    assert np.allclose(ramp.values, -1.0 + 3.0 * g.times(), atol=1e-14)
    relax = fluid_v(2.0, 1.0, 0.0, g)
    assert np.allclose(relax.values, 2.0 * (1.0 - np.exp(-g.times())), atol=1e-14)


def test_fluid_w_agrees_with_reflection_operator():
    # the same object by two code paths: closed form vs R_theta(w0 + mu*e)
    g = Grid(2.0, 4000)
    cases = [
        (1.0, 2.0, 0.0),
        (1.0, 2.0, 1.5),
        (0.0, 1.0, 0.7),
        (-1.0, 1.0, 2.0),
        (-1.0, 0.0, 0.8),
        (0.5, -0.5, 0.2),
        (-1.0, -0.5, 0.4),  # w0 < mu/theta = 2
    ]
    for mu, theta, w0 in cases:
        x = StepPath(g, w0 + mu * g.times())
        z = reflect_theta(x, theta).z
        ref = fluid_w(mu, theta, w0, g)
        bound = euler_error_bound(theta, g, x, z) + 1e-12
        assert sup_norm(z - ref) <= bound, (mu, theta, w0)


def test_fluid_w_ode_residual_on_positive_set():
    mu, theta, w0 = -1.0, 1.0, 2.0
    g = Grid(2.0, 2000)
    path = fluid_w(mu, theta, w0, g)
    vals = path.values
    t0 = hitting_time_w(mu, theta, w0)
    interior = int(t0 / g.dt) - 2
    centered = (vals[2:interior] - vals[: interior - 2]) / (2.0 * g.dt)
    residual = centered + theta * vals[1 : interior - 1] - mu
    amp = abs(w0 - mu / theta)
    tol = abs(theta) ** 3 * amp * g.dt**2 / 3.0
    assert np.max(np.abs(residual)) <= tol


def test_convergence_report_deterministic_noise_discretization_only():
    params = make_params(mu=1.0, theta=2.0, w0=0.0, deterministic=True)
    rows = fluid_convergence_report(params, [100, 1000], 3, seed=1)
    assert rows[0].mean_sup_error <= 2.0 / 100
    assert rows[1].mean_sup_error <= 2.0 / 1000
    assert rows[1].mean_sup_error <= 0.3 * rows[0].mean_sup_error


def test_convergence_report_stochastic_decrease():
    params = make_params(mu=1.0, theta=2.0, w0=0.0)
    rows = fluid_convergence_report(params, [100, 1000, 10000], 60, seed=2)
    means = [r.mean_sup_error for r in rows]
    ses = [r.se for r in rows]
    assert means[1] <= means[0] + ses[0]
    assert means[2] <= means[1] + ses[1]


def test_convergence_report_zero_noise_fixed_point():
    params = make_params(mu=1.0, theta=2.0, w0=0.5, deterministic=True)
    rows = fluid_convergence_report(params, [100], 2, seed=3)
    assert rows[0].mean_sup_error <= 2.0 / 100


def test_convergence_report_v_process():
    params = make_params(mu=1.0, theta=2.0)
    rows = fluid_convergence_report(params, [100, 1000], 40, seed=4, process="v", v0=1.0)
    assert rows[1].mean_sup_error <= rows[0].mean_sup_error + rows[0].se


def test_convergence_requires_ascending_ladder():
    params = make_params()
    with pytest.raises(ValueError, match="ascending"):
        fluid_convergence_report(params, [1000, 100], 5, seed=1)
