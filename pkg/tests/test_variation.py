import math

import numpy as np
import pytest

from roughlab.fbm import CovarianceModel, sample_values
from roughlab.lift import coarsen, lift_vertices
from roughlab.variation import (
    ConstraintError,
    MetricParams,
    RhoSet,
    block_cost_columns,
    dp_exact,
    dp_optimum,
    finalize,
    hl_bound,
    rho,
    rho_set,
)

from oracles import enumerate_optimum

P = MetricParams(2.5, 2.0, 6)


def random_lift(rng, m, d=2, n_max=None):
    v = np.vstack([np.zeros(d), np.cumsum(rng.normal(size=(2**m, d)), axis=0)])
    return lift_vertices(v, m, n_max=m if n_max is None else n_max)


def test_params_validation():
    with pytest.raises(ConstraintError, match="gamma > p - 1"):
        MetricParams(2.5, 1.0, 4)
    with pytest.raises(ConstraintError, match="p in"):
        MetricParams(4.5, 5.0, 4)
    with pytest.raises(ConstraintError, match="hp > 1"):
        MetricParams(2.5, 2.0, 4).check_hurst(0.35)


def test_rho_identical_is_zero(rng):
    a = random_lift(rng, 3, n_max=6)
    for i in (1, 2, 3):
        assert rho(a, a, i, P) == 0.0


def test_rho_straight_line_closed_form():
    v = 1.7
    lift = lift_vertices(np.array([[0.0], [v]]), 0, n_max=6)
    series = math.fsum(n**P.gamma * 2 ** (n * (1 - P.p)) for n in range(1, 7))
    assert abs(rho(lift, None, 1, P) - (abs(v) ** P.p * series) ** (1 / P.p)) < 1e-13


@pytest.mark.parametrize("eps", [0.5, 2.0])
def test_rho_homogeneity(rng, eps):
    a, b = random_lift(rng, 3, n_max=6), random_lift(rng, 4, n_max=6)
    for i in (1, 2, 3):
        r = rho(a, b, i, P)
        assert abs(rho(a.dilate(eps), b.dilate(eps), i, P) - eps**i * r) <= 1e-10 * eps**i * r


def test_rho_pseudometric(rng):
    params = MetricParams(3.2, 2.5, 5)
    for _ in range(10):
        a, b, c = (random_lift(rng, 3, n_max=5) for _ in range(3))
        for i in (1, 2, 3):  # p / i >= 1 for every i when p > 3
            ab, ba = rho(a, b, i, params), rho(b, a, i, params)
            assert abs(ab - ba) < 1e-12 * max(ab, 1)
            assert ab <= rho(a, c, i, params) + rho(c, b, i, params) + 1e-10


def test_rho_batched_matches_single(rng):
    v = np.stack([np.vstack([np.zeros(2), np.cumsum(rng.normal(size=(8, 2)), 0)]) for _ in range(3)])
    w = rng.normal(size=v.shape)
    w[:, 0] = 0
    A, B = lift_vertices(v, 3, n_max=5), lift_vertices(w, 3, n_max=5)
    got = rho(A, B, 2, MetricParams(2.5, 2.0, 5))
    for j in range(3):
        a, b = lift_vertices(v[j], 3, n_max=5), lift_vertices(w[j], 3, n_max=5)
        assert abs(got[j] - rho(a, b, 2, MetricParams(2.5, 2.0, 5))) < 1e-12


def test_dp_identical_is_zero(rng):
    a = random_lift(rng, 3)
    assert dp_exact(a, a, 2.5, 3) == 0.0


def test_dp_monotone_path_single_block():
    v = np.concatenate([[0.0], np.cumsum(np.random.default_rng(3).random(8))])[:, None]
    a = lift_vertices(v, 3)
    zero = lift_vertices(np.zeros((9, 1)), 3)
    level1 = finalize(dp_optimum(a, zero, 2.5, 3), 2.5)[0]
    assert abs(level1 - v[-1, 0]) < 1e-12
    # brute force over all 2^7 partitions agrees that the coarsest wins
    cols = list(block_cost_columns(a, zero, 2.5, 3))
    assert enumerate_optimum(cols, 0, 8) == cols[-1][0][0]


def test_dp_matches_enumeration_on_8_intervals(rng):
    for _ in range(5):
        a, b = random_lift(rng, 3, d=2), random_lift(rng, 3, d=2)
        cols = list(block_cost_columns(a, b, 2.7, 3))
        opt = [enumerate_optimum(cols, i, 8) for i in range(3)]
        assert np.array_equal(dp_optimum(a, b, 2.7, 3), np.array(opt))
        assert dp_exact(a, b, 2.7, 3) == np.max(finalize(opt, 2.7))


def test_dp_monotone_in_grid_level(rng):
    a, b = random_lift(rng, 2, n_max=5), random_lift(rng, 3, n_max=5)
    vals = [dp_exact(a, b, 2.5, g) for g in range(0, 6)]
    assert all(x <= y + 1e-12 for x, y in zip(vals[:-1], vals[1:]))


def test_dp_budget():
    a = lift_vertices(np.zeros((2, 1)), 0, n_max=12, depth=1)
    with pytest.raises(ValueError, match="budget"):
        dp_exact(a, a, 2.5, 12)


def test_hl_bound_examples():
    zero = RhoSet(0, 0, 0, 1.0, 2.0, 3.0, 4.0)
    assert hl_bound(zero, P) == 0.0
    assert hl_bound(RhoSet(1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0), P) == 4.0
    with pytest.raises(ValueError):
        hl_bound(RhoSet(-1, 0, 0, 0, 0, 0, 0), P)


def _ratios(seed):
    params = MetricParams(2.5, 2.0, 8)
    x = sample_values(CovarianceModel(0.5), 8, 2, 200, seed)
    out = []
    for j, m in enumerate((3, 4, 5, 6)):
        v = x[50 * j : 50 * j + 50]
        a = lift_vertices(coarsen(v, 8, m), m, n_max=8)
        b = lift_vertices(coarsen(v, 8, m + 1), m + 1, n_max=8)
        out.append(dp_exact(a, b, 2.5, m + 1) / hl_bound(rho_set(a, b, params), params))
    return np.concatenate(out)


def test_hl_calibration_stable():
    calibrated = np.max(_ratios(100))
    fresh = np.max(_ratios(101))
    assert abs(fresh / calibrated - 1) <= 0.2
