import numpy as np
import pytest
import scipy.linalg as sla
import sympy as sp
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from koopdmd.control import (
    CareError,
    LinearizedModel,
    LqrWeights,
    care_residual,
    linearize,
    lqr_gain,
    solve_care,
)
from koopdmd.dynamics import CartPoleParams, PendulumParams, simulate

PEND = PendulumParams()
CART = CartPoleParams()


def _scaled_residual(A, B, Q, R, P):
    return np.linalg.norm(care_residual(A, B, Q, R, P)) / (1 + np.linalg.norm(P))


def test_linearize_pendulum_upright():
    lin = linearize("pendulum", PEND, [0, 0])
    np.testing.assert_allclose(lin.A, [[0, 1], [4.905, 0]], rtol=1e-15)
    np.testing.assert_allclose(lin.B, [[0], [0.25]], rtol=1e-15)


def _cartpole_symbolic_jacobian(x_eq):
    x, xd, th, thd, u = sp.symbols("x xd th thd u", real=True)
    m, M, L, g = sp.Rational(1), sp.Rational(5), sp.Rational(2), sp.Rational(981, 100)
    s, c = sp.sin(th), sp.cos(th)
    D = m * L**2 * (M + m * s**2)
    f = sp.Matrix(
        [
            xd,
            (m**2 * L**2 * g * c * s + m * L**2 * (m * L * thd**2 * s) + m * L**2 * u) / D,
            thd,
            (-(m + M) * m * g * L * s - m * L * c * (m * L * thd**2 * s) - m * L * c * u) / D,
        ]
    )
    subs = dict(zip((x, xd, th, thd, u), (*x_eq, 0)))
    A = np.array(f.jacobian([x, xd, th, thd]).subs(subs).evalf(), dtype=float)
    B = np.array(f.jacobian([u]).subs(subs).evalf(), dtype=float)
    return A, B


@pytest.mark.parametrize("x_eq", [[1, 0, sp.pi, 0], [0, 0, 0, 0]])
def test_linearize_cartpole_matches_symbolic(x_eq):
    A_sym, B_sym = _cartpole_symbolic_jacobian(x_eq)
    lin = linearize("cartpole", CART, [float(v) for v in x_eq])
    np.testing.assert_allclose(lin.A, A_sym, atol=1e-12)
    np.testing.assert_allclose(lin.B, B_sym, atol=1e-12)


def test_cartpole_x_row_theta_entry():
    lin = linearize("cartpole", CART, [1, 0, np.pi, 0])
    assert lin.A[1, 2] == pytest.approx(CART.m * CART.g / CART.M)
    assert abs(lin.A[1, 2]) == pytest.approx(1.962)


@pytest.mark.parametrize("system,x_eq", [("pendulum", [0, 0]), ("cartpole", [1, 0, np.pi, 0])])
def test_single_actuator(system, x_eq):
    params = PEND if system == "pendulum" else CART
    assert linearize(system, params, x_eq).B.shape[1] == 1


def test_linearize_rejects_non_equilibrium():
    with pytest.raises(ValueError, match="not an equilibrium"):
        linearize("pendulum", PEND, [0.3, 0])
    with pytest.raises(ValueError):
        linearize("cartpole", CART, [0, 1, np.pi, 0])


def test_care_scalar():
    assert solve_care([[0]], [[1]], [[1]], [[1]])[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_care_double_integrator():
    P = solve_care([[0, 1], [0, 0]], [[0], [1]], np.eye(2), [[1]])
    r3 = np.sqrt(3)
    np.testing.assert_allclose(P, [[r3, 1], [1, r3]], atol=1e-10)


def test_care_zero_cost_hurwitz():
    A = np.array([[-1.0, 2.0], [0.0, -3.0]])
    P = solve_care(A, [[0], [1]], np.zeros((2, 2)), [[1]])
    np.testing.assert_allclose(P, 0, atol=1e-12)


def test_care_not_stabilizable():
    with pytest.raises(CareError, match="stabilizable"):
        solve_care(np.eye(2), [[1], [0]], np.eye(2), [[1]])


def test_care_not_detectable():
    with pytest.raises(CareError, match="detectable"):
        solve_care([[1.0]], [[1.0]], [[0.0]], [[1.0]])


def test_lqr_double_integrator_gain():
    model = LinearizedModel(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]), np.zeros(2))
    ctrl = lqr_gain(model, LqrWeights.from_diagonals([1, 1], [1]))
    np.testing.assert_allclose(ctrl.K, [[1, np.sqrt(3)]], atol=1e-8)


def test_lqr_pendulum_stabilizing():
    lin = linearize("pendulum", PEND, [0, 0])
    ctrl = lqr_gain(lin, LqrWeights.from_diagonals([0, 10], [1]))
    P_oracle = sla.solve_continuous_are(lin.A, lin.B, np.diag([0, 10.0]), np.eye(1))
    np.testing.assert_allclose(ctrl.P, P_oracle, rtol=1e-9)
    assert np.max(np.linalg.eigvals(lin.A - lin.B @ ctrl.K).real) < 0


def test_lqr_zero_error_zero_control():
    lin = linearize("cartpole", CART, [1, 0, np.pi, 0])
    ctrl = lqr_gain(lin, LqrWeights.from_diagonals([5, 10, 0, 0], [1]), [1, 0, np.pi, 0])
    assert ctrl([1, 0, np.pi, 0]) == 0.0


def test_weights_validation():
    with pytest.raises(ValueError):
        LqrWeights.from_diagonals([-1, 1], [1])
    with pytest.raises(ValueError):
        LqrWeights.from_diagonals([1, 1], [0])


def test_pendulum_closed_loop_converges():
    lin = linearize("pendulum", PEND, [0, 0])
    ctrl = lqr_gain(lin, LqrWeights.from_diagonals([0, 10], [1]))
    traj = simulate("pendulum", PEND, [np.pi / 4, 0], dt=0.01, steps=1000, controller=ctrl)
    assert np.min(np.max(np.abs(traj.states), axis=1)) < 1e-2


@st.composite
def lqr_problems(draw):
    n = draw(st.integers(1, 4))
    A = draw(arrays(float, (n, n), elements=st.floats(-2, 2)))
    B = draw(arrays(float, (n, 1), elements=st.floats(-2, 2)))
    q = draw(arrays(float, n, elements=st.floats(0.1, 10)))
    r = draw(st.floats(0.1, 10))
    return A, B, np.diag(q), np.array([[r]])


@given(lqr_problems())
def test_care_contract(problem):
    A, B, Q, R = problem
    ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(A.shape[0])])
    s = np.linalg.svd(ctrb, compute_uv=False)
    assume(s[-1] > 1e-3 * max(1.0, s[0]))
    P = solve_care(A, B, Q, R)
    assert _scaled_residual(A, B, Q, R, P) < 1e-8
    assert np.linalg.norm(P - P.T) < 1e-10
    assert np.min(np.linalg.eigvalsh(P)) > -1e-9
    K = np.linalg.solve(R, B.T @ P)
    assert np.max(np.linalg.eigvals(A - B @ K).real) < 0
    np.testing.assert_allclose(P, sla.solve_continuous_are(A, B, Q, R), rtol=1e-6, atol=1e-8)
