import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from roughflow import path_lift as pl
from roughflow import tensor as T
from roughflow.path_lift import PiecewisePath
from roughflow.rde import fields as fl
from roughflow.rde import solver as S
from roughflow.rde.fields import VectorFieldSet


def line(n=8, p=2.5, N=2, slope=1.0):
    t = np.linspace(0, 1, n + 1)
    return pl.signature(PiecewisePath(t, slope * t[:, None]), N=N, p=p)


def curve(n=64, p=2.5, N=2):
    t = np.linspace(0, 1, n + 1)
    return pl.signature(PiecewisePath(t, np.column_stack([np.sin(2 * t), t**2 - t])), N=N, p=p)


def test_exponential_growth():
    F = VectorFieldSet.from_text(1, [["x1"]])
    res = S.solve_flow(F, line(), 0.0, 1.0, [2.0], tol=1e-10)
    assert res.converged
    assert res.value[0] == pytest.approx(2 * math.e, abs=1e-8)


def test_zero_fields_are_identity():
    F = VectorFieldSet.from_text(2, [["0", "0"], ["0", "0"]])
    res = S.solve_path(F, curve(8), [1.0, -2.0])
    np.testing.assert_array_equal(res.values, np.tile([1.0, -2.0], (9, 1)))


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_pure_area_linear_fields(seed):
    rng = np.random.default_rng(seed)
    A, B = rng.normal(0, 0.5, (2, 2, 2))
    F = VectorFieldSet.linear([A, B])
    x0 = rng.normal(size=2)
    res = S.solve_flow(F, pl.pure_area(1.0, 4), 0.0, 1.0, x0, tol=1e-10)
    np.testing.assert_allclose(res.value, expm(math.pi * (B @ A - A @ B)) @ x0, atol=1e-8)


def test_log_ode_step_rejects_non_lie_input():
    F = VectorFieldSet.from_text(1, [["x1"]])
    bad = T.TruncatedTensor(1, 2, 0.0, (np.array([1.0]), np.array([0.3])))
    with pytest.raises(S.NotLieElement):
        S.log_ode_step(F, bad, [1.0])
    ok = T.TruncatedTensor.from_vector([0.5], 2)
    assert S.log_ode_step(F, ok, [1.0], ode_substeps=64)[0] == pytest.approx(math.exp(0.5), abs=1e-10)


def test_log_ode_step_level_three():
    # [V1, [V1, V2]] for linear fields is the nested commutator
    rng = np.random.default_rng(3)
    A, B = rng.normal(0, 0.5, (2, 2, 2))
    F = VectorFieldSet.linear([A, B])
    e = [T.basis_vector(i, 2, 3) for i in range(2)]
    lam = T.scale(0.3, T.bracket(e[0], T.bracket(e[0], e[1])))
    x = np.array([1.0, 0.5])
    comm = lambda P, Q: Q @ P - P @ Q  # field bracket of x -> Px and x -> Qx
    M = comm(A, comm(A, B))
    np.testing.assert_allclose(S.log_ode_step(F, lam, x, ode_substeps=64), expm(0.3 * M) @ x, atol=1e-10)


def test_inverse_flow_recovers_start():
    F = VectorFieldSet.from_text(2, [["x2", "sin(x1)"], ["1", "x1*x2"]])
    X = curve(32)
    x = np.array([0.3, -0.2])
    y = S.solve_flow(F, X, 0.0, 1.0, x, tol=1e-10).value
    back = S.solve_inverse_flow(F, X, 0.0, 1.0, y, tol=1e-10)
    np.testing.assert_allclose(back.value, x, atol=1e-8)


def test_flow_is_a_flow():
    F = VectorFieldSet.from_text(2, [["x2", "sin(x1)"], ["1", "x1*x2"]])
    X = curve(32)
    x = np.array([0.3, -0.2])
    whole = S.solve_flow(F, X, 0.0, 1.0, x, tol=1e-10).value
    half = S.solve_flow(F, X, 0.0, 0.5, x, tol=1e-10).value
    np.testing.assert_allclose(S.solve_flow(F, X, 0.5, 1.0, half, tol=1e-10).value, whole, atol=1e-8)


def test_blow_up_raises():
    F = VectorFieldSet.from_text(1, [["x1^2"]])
    with pytest.raises(S.SolverBlowUp):
        S.solve_path(F, line(slope=3.0), [1.0], max_depth=4)


def test_solve_path_matches_classical_ode_on_piecewise_linear_driver():
    F = VectorFieldSet.from_text(2, [["x2", "sin(x1)"], ["1", "x1*x2"]], drift=["-x1", "0"])
    X = curve(16)
    traj = S.solve_path(F, X, [0.3, -0.2], tol=1e-10)
    ode = S.ode_solve_piecewise_linear(F, X.times, X.path_values(), [0.3, -0.2], ode_substeps=64)
    np.testing.assert_allclose(traj.values, ode, atol=1e-8)


def test_integral_residual_small_for_solution():
    F = VectorFieldSet.from_text(2, [["x2", "sin(x1)"], ["1", "x1*x2"]], drift=["-x1", "0"])
    res = []
    for n in (2**8, 2**10):
        X = curve(n)
        traj = S.solve_path(F, X, [0.3, -0.2], tol=1e-10)
        res.append(S.integral_residual(traj.values, F, X))
    # second-order germ: residual ~ h^2
    assert res[1] < 1e-4
    assert res[0] / res[1] > 10
    wrong = traj.values + 0.01 * X.times[:, None]
    assert S.integral_residual(wrong, F, X) > 5e-3


def test_perturbed_driver_is_extra_drift():
    # adding t c [e1, e2] at level 2 adds the drift c [V1, V2]
    F = VectorFieldSet.from_text(2, [["x2", "0"], ["0", "x1^2"]])
    c = 0.7
    a = T.TruncatedTensor(2, 2, 0.0, (np.zeros(2), c * np.array([0.0, 1.0, -1.0, 0.0])))
    X = curve(32)
    Y = S.perturbed_driver(X, a)
    br = fl.field_text(fl.lie_bracket(F.fields[0], F.fields[1]))
    G = VectorFieldSet.from_text(2, [["x2", "0"], ["0", "x1^2"]], drift=[f"{c}*({e})" for e in br])
    got = S.solve_path(F, Y, [0.5, 0.2], tol=1e-10).values
    want = S.solve_path(G, X, [0.5, 0.2], tol=1e-10).values
    np.testing.assert_allclose(got, want, atol=1e-8)
    with pytest.raises(ValueError):
        S.perturbed_driver(X, T.TruncatedTensor.from_vector([1.0, 0.0], 2))


def test_generator_requires_levels():
    F = VectorFieldSet.from_text(1, [["x1"]])
    with pytest.raises(ValueError):
        S.LogODEGenerator(F, line(N=1, p=2.5))
    G = VectorFieldSet.from_text(1, [["x1"], ["1"]])
    with pytest.raises(ValueError):
        S.LogODEGenerator(G, line())


def test_exponents():
    F = VectorFieldSet.from_text(1, [["x1"]])
    assert S.LogODEGenerator(F, line(p=1.5, N=1)).exponent == pytest.approx(2 / 1.5)
    assert S.LogODEGenerator(F, line(p=2.5)).exponent == pytest.approx(3 / 2.5)
    X3 = pl.lyons_extend_level3(line(p=2.5))
    assert S.LogODEGenerator(F, pl.RoughPathGrid(3.5, X3.times, X3.sigs, X3.origin)).exponent == pytest.approx(4 / 3.5)
    assert S.euler_generator(F, line(p=1.5, N=1)).exponent == pytest.approx(2 / 1.5)


def test_stepper_source_and_cache():
    F = VectorFieldSet.from_text(1, [["x1"]])
    assert S.stepper(F) is S.stepper(F)
    assert "def flow" in S.stepper(F).source


def test_non_geometric_driver_uses_symmetric_part():
    # Ito-type level 2: XX = X X / 2 - t/2 makes dx = x dX give exp(X - t/2)
    t = np.linspace(0, 1, 9)
    X = pl.signature(PiecewisePath(t, 0.8 * t[:, None]), N=2, p=2.5)
    sigs = (X.sigs[0], X.sigs[1], X.sigs[2] - 0.5 * t[:, None])
    Y = pl.RoughPathGrid(2.5, t, sigs, X.origin, weak_geometric=False)
    F = VectorFieldSet.from_text(1, [["x1"]])
    res = S.solve_flow(F, Y, 0.0, 1.0, [1.0], tol=1e-10, max_depth=20)
    assert res.value[0] == pytest.approx(math.exp(0.8 - 0.5), abs=1e-6)
