import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from roughflow import flows
from roughflow.flows import ApproxFlowGenerator, flow_eval


def euler(lam):
    # mu_ts(x) = x + (t - s) lam x, the Euler step of x' = lam x
    return ApproxFlowGenerator(lambda s, t, x: x + (t - s) * lam * x, 2.0)


def test_exponent_must_exceed_one():
    with pytest.raises(ValueError):
        ApproxFlowGenerator(lambda s, t, x: x, 1.0)


def test_euler_composition_converges_to_exponential():
    res = flow_eval(euler(1.0), 0.0, 1.0, np.array([1.0]), tol=1e-4, max_depth=20)
    assert res.converged
    # Euler error at depth n is ~ e / 2^(n+1), the same size as the last delta
    assert res.value[0] == pytest.approx(np.e, abs=4 * res.last_delta)


def test_identity_on_degenerate_interval():
    res = flow_eval(euler(3.0), 0.5, 0.5, np.array([2.0]))
    assert res.value[0] == 2.0 and res.dyadic_depth_used == 0


def test_nonconvergence_reported():
    res = flow_eval(euler(1.0), 0.0, 1.0, np.array([1.0]), tol=1e-12, max_depth=5)
    assert not res.converged
    assert res.dyadic_depth_used == 5
    assert len(res.deltas) == 5


@settings(max_examples=10)
@given(st.floats(-2, 2), st.floats(0.0, 1.0), st.floats(0.05, 1.0))
def test_flow_property(lam, s, h):
    # phi_tu o phi_us = phi_ts up to the requested tolerance
    mu = ApproxFlowGenerator(lambda a, b, x: x * np.exp(lam * (b - a)) + 1e-3 * (b - a) ** 2, 2.0)
    u, t = s + h / 4, s + h
    x = np.array([0.7])
    whole = flow_eval(mu, s, t, x, tol=1e-7, max_depth=20).value
    part = flow_eval(mu, u, t, flow_eval(mu, s, u, x, tol=1e-7, max_depth=20).value, tol=1e-7, max_depth=20).value
    assert part == pytest.approx(whole, abs=1e-6)


def test_convergence_rate_matches_exponent():
    rows = flows.convergence_table(euler(1.0), 0.0, 1.0, np.array([1.0]), [0] + list(range(4, 13)))
    assert np.isnan(rows[0].delta)
    rate, _ = flows.fit_rate([r.depth for r in rows], [r.delta for r in rows])
    assert rate == pytest.approx(1.0, abs=0.1)


def test_validate_defect():
    mu = euler(2.0)
    ratio = mu.validate(0.0, 1.0, points=[[1.0], [-0.5]], rng=0)
    # defect of Euler: (t-u)(u-s) lam^2 x <= lam^2 |x| (t-s)^2 / 4
    assert 0 < ratio <= 1.0 + 1e-12
    bad = ApproxFlowGenerator(lambda s, t, x: x + 1.0, 2.0)
    with pytest.raises(ValueError):
        bad.validate(0.0, 1.0, points=[[0.0]])


def test_inverse_flow():
    lam = 0.8
    fwd = euler(lam)
    back = ApproxFlowGenerator(lambda s, t, x: x - (t - s) * lam * x, 2.0)
    x = np.array([1.3])
    y = flow_eval(fwd, 0.0, 1.0, x, tol=1e-4, max_depth=20)
    z = flows.inverse_flow_eval(back, 0.0, 1.0, y.value, tol=1e-4, max_depth=20)
    assert z.converged
    assert z.value[0] == pytest.approx(x[0], abs=1e-3)


def test_compose_reverse_order():
    log = []
    mu = ApproxFlowGenerator(lambda s, t, x: (log.append((s, t)), x)[1], 2.0)
    flows.compose_along_partition(mu, [0.0, 1.0, 2.0], np.zeros(1), reverse=True)
    assert log == [(1.0, 2.0), (0.0, 1.0)]
    with pytest.raises(ValueError):
        flows.compose_along_partition(mu, [0.0, 2.0, 1.0], np.zeros(1))


def test_integral_product_constant_generator():
    M = np.array([[0.0, 1.0], [-2.0, 0.3]])
    res = flows.integral_product(lambda t: t[:, None, None] * M, 0.0, 1.0, tol=1e-7)
    assert res.converged
    np.testing.assert_allclose(res.value, expm(M), atol=1e-6)


def test_integral_product_time_ordering():
    # A_t = diag(t) + t^2 N with non-commuting parts; compare with a fine RK4 matrix ODE
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    D = np.diag([1.0, -1.0])
    A = lambda t: t[:, None, None] * D + (t**2)[:, None, None] * N
    res = flows.integral_product(A, 0.0, 1.0, tol=1e-7)
    f = lambda t, Y: (D + 2 * t * N) @ Y
    Y, n = np.eye(2), 2000
    h = 1.0 / n
    for k in range(n):
        t = k * h
        k1 = f(t, Y); k2 = f(t + h / 2, Y + h / 2 * k1); k3 = f(t + h / 2, Y + h / 2 * k2); k4 = f(t + h, Y + h * k3)
        Y = Y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    np.testing.assert_allclose(res.value, Y, atol=1e-6)


def test_fit_power():
    h = np.array([0.1, 0.05, 0.025])
    slope, resid = flows.fit_power(h, 3 * h**1.5)
    assert slope == pytest.approx(1.5)
    assert resid < 1e-12
