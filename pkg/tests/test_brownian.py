import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughflow import brownian as bm
from roughflow import path_lift as pl
from roughflow.rde.fields import VectorFieldSet


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.integers(0, 8), st.integers(1, 4))
def test_restriction_is_consistent(seed, n, extra):
    fine = bm.sample(2, n + extra, 1.0, seed)
    coarse = bm.sample(2, n, 1.0, seed)
    np.testing.assert_array_equal(fine.at_depth(n).values, coarse.values)
    np.testing.assert_array_equal(bm.refine(coarse, n + extra).values, fine.values)


def test_seeds_differ_and_repeat():
    a, b = bm.sample(1, 6, seed=1), bm.sample(1, 6, seed=2)
    assert not np.allclose(a.values, b.values)
    np.testing.assert_array_equal(a.values, bm.sample(1, 6, seed=1).values)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        bm.sample(1, -1)
    with pytest.raises(ValueError):
        bm.sample(1, 4, T=0.0)
    with pytest.raises(ValueError):
        bm.piecewise_linear_lift(bm.sample(1, 4), p=3.5)


def test_increment_law():
    paths = bm.sample_batch(4000, 1, 4, T=2.0, seed=3)
    inc = np.diff(paths, axis=1).ravel()
    assert abs(inc.mean()) < 3 * math.sqrt(2.0 / 16 / inc.size)
    assert inc.var() == pytest.approx(2.0 / 16, rel=0.03)
    ends = paths[:, -1, 0]
    assert ends.var() == pytest.approx(2.0, rel=0.07)


def test_quadratic_variation():
    s = bm.sample(1, 16, T=1.0, seed=5)
    assert np.sum(s.increments**2) == pytest.approx(1.0, abs=0.02)


def test_stratonovich_lift_is_weak_geometric():
    s = bm.sample(2, 6, seed=4)
    X = bm.stratonovich_lift(s, extra_depth=4)
    np.testing.assert_allclose(X.path_values(), s.values, atol=1e-12)
    assert pl.chen_residual(X, rng=0) < 1e-10
    assert pl.is_weak_geometric(X, tol=1e-9)
    fine = bm.refine(s, 10).values
    np.testing.assert_allclose(bm.levy_area(X)[-1], bm.polygon_areas(fine[None])[0], atol=1e-12)


def test_ito_lift_shift():
    s = bm.sample(2, 5, seed=6)
    S = bm.stratonovich_lift(s, extra_depth=3)
    I = bm.ito_lift(S)
    assert not I.weak_geometric
    assert pl.chen_residual(I, rng=0) < 1e-10
    inc_s, inc_i = S.increment_idx(3, 20), I.increment_idx(3, 20)
    shift = 0.5 * (S.times[20] - S.times[3]) * np.eye(2)
    np.testing.assert_allclose(inc_s.block(2) - inc_i.block(2), shift, atol=1e-12)
    np.testing.assert_allclose(bm.levy_area(I), bm.levy_area(S), atol=1e-12)


def test_summarize():
    st_ = bm.summarize([1.0, 2.0, 3.0, 4.0])
    assert st_.mean == 2.5
    assert st_.variance == pytest.approx(5 / 3)
    lo, hi = st_.mean_ci()
    assert lo < 2.5 < hi


def test_levy_stats_small_run():
    st_ = bm.levy_area_stats(20000, n=6, T=2.0, seed=1)
    lo, hi = st_.variance_ci()
    # polygon variance at depth n is T^2 (1 - 4^-n) / 4
    assert lo <= 1.0 * (1 - 4.0**-6) <= hi
    lo, hi = st_.mean_ci()
    assert lo <= 0.0 <= hi


def test_rough_integral_of_b_db():
    s = bm.sample(1, 10, seed=7)
    G = lambda b: b[:, :, None]
    DG = lambda b: np.ones((b.shape[0], 1, 1, 1))
    res = bm.rough_vs_ito_integral(s, G, DG)
    bT = s.values[-1, 0]
    assert float(res.rough[0]) == pytest.approx(0.5 * bT**2 - 0.5, abs=1e-10)
    assert res.gap < 0.05
    strat = bm.rough_vs_ito_integral(s, G, DG, stratonovich=True)
    assert float(strat.rough[0]) == pytest.approx(0.5 * bT**2, abs=1e-10)


def test_wong_zakai_gap_shrinks_on_average():
    F = VectorFieldSet.from_text(2, [["x2", "0"], ["0", "-x1"]])
    gaps = np.array([[r.gap for r in bm.wong_zakai_experiment(F, [1.0, 0.5], [4, 6, 8], seed=k, extra_depth=4)]
                     for k in range(4)])
    m = gaps.mean(axis=0)
    assert m[0] > m[1] > m[2]


def test_delayed_pair_shapes_and_level_one():
    s = bm.sample(1, 8, seed=2)
    X = bm.delayed_pair(s, 2 ** -4)
    vals = X.path_values()
    np.testing.assert_allclose(vals[16:, 0], s.values[:-16, 0])
    np.testing.assert_allclose(vals[:16, 0], 0.0)
    Y = bm.delayed_limit(s)
    assert pl.is_weak_geometric(Y)
    with pytest.raises(ValueError):
        bm.delayed_pair(s, 1e-6)


@pytest.mark.slow
def test_delayed_pair_approaches_limit():
    p = 2.9
    eps = [2.0**-2, 2.0**-4, 2.0**-6]
    d = np.zeros((10, len(eps)))
    for seed in range(10):
        s = bm.sample(1, 11, seed=seed)
        Y = bm.delayed_limit(s, p)
        for j, e in enumerate(eps):
            d[seed, j] = pl.distance(bm.delayed_pair(s, e, p), Y)
    m = d.mean(axis=0)
    assert m[-1] < m[0]
    slope = np.polyfit(np.log(eps), np.log(m), 1)[0]
    assert slope > 0


def test_joint_lift():
    s = bm.sample(1, 6, seed=8)
    t = s.times
    X = pl.signature(pl.PiecewisePath(t, np.column_stack([np.sin(t), t**2])), N=2, p=2.5)
    J = bm.joint_lift(X, s, extra_depth=3)
    assert J.dim == 3
    assert pl.chen_residual(J, rng=0) < 1e-10
    blk = J.sigs[2].reshape(-1, 3, 3)
    np.testing.assert_allclose(blk[:, :2, :2], X.sigs[2].reshape(-1, 2, 2), atol=1e-12)
    with pytest.raises(ValueError):
        bm.joint_lift(X, bm.sample(1, 5, seed=8))
