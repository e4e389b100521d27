import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughflow import path_lift as pl
from roughflow import tensor as T
from roughflow.path_lift import PathFormatError, PiecewisePath, RoughPathGrid


def _random_path(seed, d, n):
    rng = np.random.default_rng(seed)
    t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 1.0, n))])
    return PiecewisePath(t, rng.normal(size=(n + 1, d)))


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 3), st.integers(2, 12))
def test_signature_chen_and_group_like(seed, d, N, n):
    X = pl.signature(_random_path(seed, d, n), N=N)
    assert pl.chen_residual(X, rng=seed) < 1e-10
    assert pl.is_weak_geometric(X)


def test_signature_of_segments_is_product_of_exponentials():
    path = _random_path(5, 3, 4)
    X = pl.signature(path, N=3)
    expect = T.TruncatedTensor.one(3, 3)
    for v in path.increments():
        expect = expect * T.segment(v, 3)
    assert X.sig(X.n_nodes - 1).allclose(expect, 1e-12)


def test_square_loop_area():
    path = PiecewisePath(np.arange(5.0), [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]])
    X = pl.signature(path, N=2)
    A = X.sig(4).block(2)
    # anticlockwise unit square: antisymmetric part carries area 1
    assert 0.5 * (A[0, 1] - A[1, 0]) == pytest.approx(1.0)
    np.testing.assert_allclose(X.sig(4).levels[0], 0.0, atol=1e-15)


def test_reparametrisation_invariance():
    path = _random_path(2, 2, 6)
    warped = PiecewisePath(path.times**2 + 3 * path.times, path.values)
    a, b = pl.signature(path, N=3), pl.signature(warped, N=3)
    assert a.sig(6).allclose(b.sig(6), 1e-12)


def test_time_reversal_gives_inverse():
    path = _random_path(3, 2, 5)
    rev = PiecewisePath(path.times, path.values[::-1])
    a, b = pl.signature(path, N=3), pl.signature(rev, N=3)
    assert (a.sig(5) * b.sig(5)).allclose(T.TruncatedTensor.one(2, 3), 1e-12)


def test_increment_off_grid_is_chen_consistent():
    X = pl.signature(_random_path(4, 2, 6), N=3)
    s, u, t = 0.37, 1.41, 2.9
    lhs = X.increment(s, u) * X.increment(u, t)
    assert lhs.allclose(X.increment(s, t), 1e-12)


def test_csv_roundtrip():
    path = _random_path(1, 3, 4)
    buf = io.StringIO()
    path.to_csv(buf, comments=["a comment"])
    back = PiecewisePath.from_csv(io.StringIO(buf.getvalue()))
    np.testing.assert_array_equal(back.values, path.values)
    np.testing.assert_array_equal(back.times, path.times)


@pytest.mark.parametrize("text, row", [
    ("t,x1\n0,1\n1\n", 3),
    ("t,x1\n0,1\n1,abc\n", 3),
    ("t,x1\n0,1\n0,2\n", 3),
    ("t,y1\n0,1\n", 1),
])
def test_csv_errors_name_the_row(text, row):
    with pytest.raises(PathFormatError) as e:
        PiecewisePath.from_csv(io.StringIO(text))
    assert e.value.row == row


def test_json_roundtrip():
    X = pl.signature(_random_path(6, 2, 3), N=3)
    Y = RoughPathGrid.from_json(X.to_json())
    for a, b in zip(X.sigs, Y.sigs):
        np.testing.assert_array_equal(a, b)


def test_young_lift_matches_exact_signature_on_smooth_path():
    t = np.linspace(0, 1, 33)
    f = lambda u: np.stack([np.sin(2 * u), u**2], -1)
    X = pl.young_lift(f, times=t, tol=1e-11)
    fine = pl.signature(PiecewisePath.from_function(f, np.linspace(0, 1, 2**14 + 1)), N=2)
    np.testing.assert_allclose(X.sigs[2][-1], fine.sigs[2][-1], atol=1e-7)
    assert pl.chen_residual(X, rng=0) < 1e-10
    assert pl.is_weak_geometric(X, tol=1e-8)


def test_young_lift_warns_on_rough_input():
    rng = np.random.default_rng(0)
    t = np.linspace(0, 1, 1025)
    w = np.concatenate([np.zeros((1, 2)), np.cumsum(rng.normal(0, math.sqrt(t[1]), (1024, 2)), axis=0)])
    with pytest.warns(UserWarning):
        pl.young_lift(PiecewisePath(t, w))


def test_pure_area():
    X = pl.pure_area(1.0, 8)
    np.testing.assert_allclose(X.sigs[1], 0.0)
    inc = X.increment(0.25, 0.75)
    np.testing.assert_allclose(inc.block(2), [[0, math.pi / 2], [-math.pi / 2, 0]], atol=1e-14)
    assert pl.is_weak_geometric(X)


def test_oscillator_converges_to_pure_area():
    steps = lambda n: 16 * n * n
    d = []
    for n in (2, 4, 8):
        path = pl.oscillator_path(n, steps(8))
        X = pl.signature(path, N=2, p=2.5).restrict(np.arange(0, steps(8) + 1, steps(8) // 64))
        X = RoughPathGrid(2.5, X.times, X.sigs, np.zeros(2))
        d.append(pl.distance(X, pl.pure_area(1.0, 64)))
    assert d[0] > d[1] > d[2]


def test_translation_shifts_levels():
    X = pl.signature(_random_path(8, 2, 16), N=2)
    times = X.times
    h = PiecewisePath(times, np.column_stack([np.sin(times), times]))
    Y = pl.translate(X, h)
    np.testing.assert_allclose(Y.path_values(), X.path_values() + h.values, atol=1e-12)
    assert pl.chen_residual(Y, rng=1) < 1e-9
    assert pl.is_weak_geometric(Y, tol=1e-8)
    # translating a piecewise-linear path by a piecewise-linear h is the signature of the sum
    Z = pl.signature(PiecewisePath(times, X.path_values() + h.values), N=2)
    np.testing.assert_allclose(Y.sigs[2], Z.sigs[2], atol=1e-8)


def test_pair_with_smooth_block_structure():
    t = np.linspace(0, 1, 65)
    X = pl.signature(PiecewisePath(t, np.random.default_rng(9).normal(size=(65, 2))), N=2)
    h = PiecewisePath(t, np.cos(3 * t)[:, None])
    P = pl.pair_with_smooth(X, h)
    assert P.dim == 3
    assert pl.chen_residual(P, rng=2) < 1e-9
    assert pl.is_weak_geometric(P, tol=1e-8)
    np.testing.assert_allclose(P.sigs[2].reshape(-1, 3, 3)[:, :2, :2], X.sigs[2].reshape(-1, 2, 2))


def test_lyons_extension_of_piecewise_linear_is_exact():
    path = _random_path(10, 2, 6)
    X3 = pl.signature(path, N=3, p=2.5)
    ext = pl.lyons_extend_level3(X3.with_level_cap(2))
    np.testing.assert_allclose(ext.sigs[3], X3.sigs[3], atol=1e-12)


def test_holder_norm_of_line():
    t = np.linspace(0, 1, 65)
    X = pl.signature(PiecewisePath(t, np.column_stack([t, 2 * t])), N=2, p=2.5)
    # |X_ts| = sqrt(5) (t - s), sup of |t - s|^(1 - 1/p) is 1
    assert pl.holder_norm(X, 1) == pytest.approx(math.sqrt(5), rel=1e-12)
    assert pl.holder_norm(X, 2) == pytest.approx(2.5, rel=1e-12)
    assert pl.distance(X, X) == 0.0


def test_holder_norm_nonuniform_grid_matches_brute_force():
    X = pl.signature(_random_path(11, 2, 20), N=2, p=2.5)
    best = 0.0
    for i in range(X.n_nodes):
        for j in range(i + 1, X.n_nodes):
            inc = X.increment_idx(i, j)
            best = max(best, np.linalg.norm(inc.levels[1]) / (X.times[j] - X.times[i]) ** (2 / 2.5))
    assert pl.holder_norm(X, 2) == pytest.approx(best, rel=1e-10)


def test_distance_requires_common_grid():
    a = pl.pure_area(1.0, 4)
    with pytest.raises(ValueError):
        pl.distance(a, pl.pure_area(1.0, 8))
