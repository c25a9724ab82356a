import math

import numpy as np
import pytest

from wdqlab.distributions import DistributionSpec
from wdqlab.oracle import (
    SmallInstance,
    expand_u,
    expand_upsilon,
    expand_v,
    fwlln_check,
    gronwall_check,
    random_instance,
    run_all_suites,
    upsilon_reversed_max_identity,
)
from wdqlab.recursion import iterate_bounding, iterate_v


def test_expand_v_single_step():
    inst = SmallInstance((3.0,), (2.0,), n=10, initial=5.0)
    # V_1 = C_0 V_0 + X_0 with C_0 = 1 - 3/10
    assert expand_v(inst) == pytest.approx(0.7 * 5.0 + 2.0)


def test_expand_v_random_walk_reduction():
    inst = SmallInstance((0.0,) * 6, (1.0, -2.0, 0.5, 3.0, -1.0, 0.25), n=7, initial=4.0)
    assert expand_v(inst) == pytest.approx(4.0 + 1.0 - 2.0 + 0.5 + 3.0 - 1.0 + 0.25)


def test_expand_v_matches_iteration(rng):
    for _ in range(100):
        inst = random_instance(rng)
        v = iterate_v(np.asarray(inst.theta_draws), np.asarray(inst.x_draws), inst.n, inst.initial)
        assert expand_v(inst) == pytest.approx(v[-1], rel=1e-12, abs=1e-12)


def test_expand_upsilon_all_negative_terms():
    inst = SmallInstance((0.0, 0.0, 0.0), (-1.0, -2.0, -0.5), n=5, initial=0.0)
    assert expand_upsilon(inst) == 0.0


def test_expand_upsilon_single_positive_dominates():
    # X_2 = 4 with C = 1 everywhere: the length-1 suffix {X_2} is the winner
    inst = SmallInstance((0.0, 0.0, 0.0), (-3.0, -5.0, 4.0), n=5, initial=0.0)
    assert expand_upsilon(inst) == pytest.approx(4.0)
    # hand enumeration: candidates are 0, 4, 4-5, 4-5-3
    assert expand_upsilon(inst) == max(0.0, 4.0, -1.0, -4.0)


def test_upsilon_dominates_w_exhaustively(rng):
    for _ in range(200):
        inst = random_instance(rng)
        w, ups, _, _ = iterate_bounding(
            np.asarray(inst.theta_draws), np.asarray(inst.x_draws), inst.n, inst.initial
        )
        for i in range(inst.length + 1):
            assert 0.0 <= w[i] <= expand_upsilon(inst, i) + 1e-12 * max(1.0, abs(ups[i]))


def test_reversed_max_identity_regardless_of_sign(rng):
    for _ in range(200):
        inst = random_instance(rng)
        ok, lhs, rhs = upsilon_reversed_max_identity(inst)
        assert ok, (lhs, rhs, inst)


def test_expand_u_is_zero_start_expansion():
    inst = SmallInstance((1.0, -2.0), (3.0, 1.5), n=4, initial=9.0)
    assert expand_u(inst) == pytest.approx(expand_v(inst) - (1 - 1 / 4) * (1 + 2 / 4) * 9.0)


def test_gronwall_trivial_cases():
    assert gronwall_check(1.0, 0.0, [0.0] * 5)
    assert gronwall_check(0.0, 0.0, [0.0] * 3)


def test_gronwall_saturated_iteration_vs_bound():
    u0, alpha, k = 2.0, 0.1, 10
    assert gronwall_check(u0, alpha, [1.0] * k)
    u = u0
    for _ in range(k):
        u = (1 + alpha) * u + 1.0
    assert u <= math.exp(k * alpha) * (u0 + k)


def test_gronwall_rejects_bad_inputs():
    with pytest.raises(ValueError):
        gronwall_check(1.0, -0.1, [0.0])
    with pytest.raises(ValueError):
        gronwall_check(1.0, 0.1, [-1.0])


def test_fwlln_deterministic_indexing_granularity_only():
    rows = fwlln_check(DistributionSpec.point_mass(2.0), [100, 1000], 3, seed=1)
    for row in rows:
        assert row.median_sup_error <= 2.0 / row.n + 1e-15


def test_fwlln_median_shrinks_like_sqrt_n():
    rows = fwlln_check(DistributionSpec.normal(1.0, 1.0), [100, 10000], 80, seed=2)
    ratio = rows[1].median_sup_error / rows[0].median_sup_error
    assert 0.03 <= ratio <= 0.3  # 1/sqrt(100) = 0.1 up to sampling noise


def test_fwlln_triangular_array_drift_still_converges():
    rows = fwlln_check(
        DistributionSpec.normal(1.0, 1.0), [100, 1000, 10000], 50, seed=3,
        mean_shift_exponent=-0.5,
    )
    meds = [r.median_sup_error for r in rows]
    assert meds[0] > meds[1] > meds[2]


def test_instance_length_cap():
    with pytest.raises(ValueError, match="capped"):
        SmallInstance((0.0,) * 13, (0.0,) * 13, n=5, initial=0.0)


def test_run_all_suites_green():
    results = run_all_suites(seed=123, cases=300)
    for r in results:
        assert r.passed, (r.suite, r.notes[:3])
