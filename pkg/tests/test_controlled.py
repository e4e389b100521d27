import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughflow import controlled as C
from roughflow import path_lift as pl
from roughflow.path_lift import PiecewisePath


def smooth_lift(n=256, p=2.5):
    t = np.linspace(0, 1, n + 1)
    return pl.signature(PiecewisePath(t, np.column_stack([np.sin(3 * t), np.cos(2 * t) - t])), N=2, p=p)


def test_p_range_enforced():
    X = smooth_lift(8, p=1.5)
    with pytest.raises(ValueError):
        C.from_reference(X)


def test_reference_controls_itself():
    X = smooth_lift(32)
    z = C.from_reference(X)
    assert C.remainder_norm(z) < 1e-12
    assert C.derivative_holder_norm(z) == 0.0
    assert C.controlled_norm(z) == pytest.approx(np.linalg.norm(X.path_values()[0]))


def test_shape_validation():
    X = smooth_lift(8)
    with pytest.raises(ValueError):
        C.ControlledPath(X, np.zeros((9, 2)), np.zeros((9, 2, 3)))
    with pytest.raises(ValueError):
        C.ControlledPath(X, np.zeros((5, 2)), np.zeros((5, 2, 2)))


@settings(max_examples=20)
@given(st.integers(0, 10**6))
def test_integral_of_x_dx_is_exact_on_geometric_lift(seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, 65)
    path = PiecewisePath(t, np.cumsum(rng.normal(0, 0.2, (65, 1)), axis=0))
    X = pl.signature(path, N=2, p=2.5)
    F = C.from_function(X, lambda x: x, lambda x: np.ones((x.shape[0], 1, 1)))
    res = C.rough_integral(F)
    xT, x0 = path.values[-1, 0], path.values[0, 0]
    assert float(res.value) == pytest.approx(0.5 * (xT**2 - x0**2), abs=1e-12)


def test_integral_against_riemann_stieltjes():
    X = smooth_lift(2**12)
    # F(x) = (x2^2, sin x1) acting on dX = (dx1, dx2)
    G = lambda x: np.stack([x[:, 1] ** 2, np.sin(x[:, 0])], axis=-1)
    DG = lambda x: np.stack([np.stack([np.zeros(len(x)), 2 * x[:, 1]], -1),
                             np.stack([np.cos(x[:, 0]), np.zeros(len(x))], -1)], axis=1)
    F = C.from_function(X, G, DG)
    res = C.rough_integral(F, tol=1e-12)
    tf = np.linspace(0, 1, 2**18 + 1)
    xf = np.column_stack([np.sin(3 * tf), np.cos(2 * tf) - tf])
    gm = 0.5 * (G(xf[1:]) + G(xf[:-1]))
    exact = np.sum(gm * np.diff(xf, axis=0))
    assert res.value == pytest.approx(exact, abs=1e-6)


def test_integral_path_matches_pointwise():
    X = smooth_lift(64)
    F = C.from_function(X, lambda x: np.cos(x), lambda x: np.apply_along_axis(np.diag, 1, -np.sin(x)))
    path = C.rough_integral_path(F)
    k = 40
    res = C.rough_integral(F, s=0.0, t=X.times[k])
    assert path[k] == pytest.approx(float(res.value), abs=1e-12)
    assert C.rough_integral(F, s=0.5, t=0.5).value == 0.0
    with pytest.raises(ValueError):
        C.rough_integral(F, s=0.001, t=0.5)


def test_compose_map_chain_rule():
    X = smooth_lift(16)
    z = C.from_reference(X)
    A = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
    w = C.compose_map(z, lambda x: x @ A.T, lambda x: np.broadcast_to(A, (x.shape[0], 3, 2)))
    assert w.values.shape == (17, 3)
    np.testing.assert_allclose(w.derivative, np.broadcast_to(A, (17, 3, 2)))
    # linear images of the reference have no remainder
    assert C.remainder_norm(w) < 1e-12
    with pytest.raises(ValueError):
        C.compose_map(z, lambda x: x @ A.T, lambda x: np.zeros((x.shape[0], 3, 3)))


def test_self_lift_of_reference_is_reference():
    X = smooth_lift(32)
    Z = C.self_lift(C.from_reference(X))
    for a, b in zip(Z.sigs, X.sigs):
        np.testing.assert_allclose(a, b, atol=1e-12)
    assert pl.chen_residual(Z, rng=0) < 1e-12


def test_self_lift_of_nonlinear_image_approximates_signature():
    X = smooth_lift(2**10)
    phi = lambda x: np.stack([np.exp(x[:, 0]), x[:, 0] * x[:, 1]], -1)
    dphi = lambda x: np.stack([np.stack([np.exp(x[:, 0]), np.zeros(len(x))], -1),
                               np.stack([x[:, 1], x[:, 0]], -1)], axis=1)
    w = C.compose_map(C.from_reference(X), phi, dphi)
    Z = C.self_lift(w)
    exact = pl.signature(PiecewisePath(X.times, w.values), N=2, p=2.5)
    np.testing.assert_allclose(Z.sigs[2][-1], exact.sigs[2][-1], atol=1e-5)


def test_with_reference_requires_same_level_one():
    X = smooth_lift(16)
    z = C.from_reference(X)
    with pytest.raises(ValueError):
        z.with_reference(smooth_lift(8))
