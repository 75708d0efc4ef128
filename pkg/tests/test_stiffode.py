"""Tests for the TR-BDF2 stiff integrator."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from vefiber.stiffode import integrate_trbdf2


def test_exponential_decay_accuracy():
    res = integrate_trbdf2(lambda t, y: -y, (0.0, 5.0), [1.0],
                           reltol=1e-8, abstol=1e-10,
                           sample_times=[1.0, 2.5, 5.0])
    assert res.success
    exact = np.exp(-res.t)
    # global error ~ n_steps * reltol for a one-step method
    assert np.max(np.abs(res.y[:, 0] - exact) / exact) < 2e-5


def test_polynomial_time_exactness():
    # 2nd-order method integrates f(t) = p'(t) exactly for quadratic p
    p = lambda t: 1.0 + 2.0 * t + 5.0 * t * t
    res = integrate_trbdf2(lambda t, y: np.array([2.0 + 10.0 * t]),
                           (0.0, 2.0), [p(0.0)], reltol=1e-3, abstol=1e-3,
                           dt_init=0.1)
    assert res.success
    assert abs(res.y[-1, 0] - p(2.0)) < 1e-10 * p(2.0)


def test_linear_stiff_system_vs_matrix_exponential():
    A = np.array([[-1e6, 2e5], [1.0, -1.0]])
    y0 = np.array([1.0, 1.0])
    t_end = 2.0
    res = integrate_trbdf2(lambda t, y: A @ y, (0.0, t_end), y0,
                           reltol=1e-7, abstol=1e-10,
                           jac=lambda t, y: A)
    assert res.success
    exact = expm(A * t_end) @ y0
    assert np.max(np.abs(res.y[-1] - exact)) < 1e-5 * np.max(np.abs(exact))
    # stiffness handled: step count far below the explicit stability limit
    assert res.n_accepted < 500


def test_strongly_damped_mode_is_killed():
    res = integrate_trbdf2(lambda t, y: -1e8 * y, (0.0, 1.0), [1.0],
                           reltol=1e-4, abstol=1e-12,
                           jac=lambda t, y: np.array([[-1e8]]))
    assert res.success
    assert abs(res.y[-1, 0]) < 1e-12
    assert res.n_accepted < 200


def test_van_der_pol_vs_scipy_reference():
    mu = 10.0

    def f(t, y):
        return np.array([y[1], mu * (1 - y[0] ** 2) * y[1] - y[0]])

    def jac(t, y):
        return np.array([[0.0, 1.0],
                         [-2 * mu * y[0] * y[1] - 1.0, mu * (1 - y[0] ** 2)]])

    y0 = np.array([2.0, 0.0])
    samples = np.linspace(2.0, 20.0, 7)
    res = integrate_trbdf2(f, (0.0, 20.0), y0, reltol=1e-8, abstol=1e-10,
                           jac=jac, sample_times=samples)
    assert res.success
    ref = solve_ivp(f, (0.0, 20.0), y0, method="Radau", rtol=1e-11,
                    atol=1e-13, t_eval=samples, jac=jac)
    assert np.max(np.abs(res.y[:, 0] - ref.y[0])) < 1e-4


def test_second_order_convergence_fixed_step():
    # huge abstol disables the controller; dt_max pins the step size
    errs = []
    for h in (0.01, 0.005):
        res = integrate_trbdf2(lambda t, y: -y * y, (0.0, 1.0), [1.0],
                               reltol=1.0, abstol=1e12,
                               dt_init=h, dt_max=h)
        errs.append(abs(res.y[-1, 0] - 0.5))
    ratio = errs[0] / errs[1]
    assert 3.5 < ratio < 4.5


def test_dense_output_between_steps():
    samples = np.array([0.0, 0.31, 0.7, 1.33, 2.0, 2.6, 3.0])
    res = integrate_trbdf2(lambda t, y: np.array([np.cos(t)]),
                           (0.0, 3.0), [0.0], reltol=1e-8, abstol=1e-10,
                           sample_times=samples)
    assert res.success
    assert np.allclose(res.t, samples)
    assert np.max(np.abs(res.y[:, 0] - np.sin(samples))) < 1e-6


def test_jacobian_callback_reduces_fevals():
    A = np.array([[-1e4, 0.0], [2.0, -3.0]])
    kw = dict(reltol=1e-7, abstol=1e-9)
    res_fd = integrate_trbdf2(lambda t, y: A @ y, (0.0, 1.0), [1.0, 0.5], **kw)
    res_an = integrate_trbdf2(lambda t, y: A @ y, (0.0, 1.0), [1.0, 0.5],
                              jac=lambda t, y: A, **kw)
    assert res_fd.success and res_an.success
    assert res_an.njev > 0
    assert res_an.nfev < res_fd.nfev
    assert np.allclose(res_fd.y[-1], res_an.y[-1], rtol=1e-5, atol=1e-9)


def test_record_steps_alignment():
    res = integrate_trbdf2(lambda t, y: -y, (0.0, 1.0), [1.0],
                           record_steps=True)
    assert res.step_y.shape == (len(res.step_t), 1)
    assert res.step_t[0] == 0.0 and res.step_t[-1] == pytest.approx(1.0)
    assert np.all(np.diff(res.step_t) > 0)
    assert res.n_accepted == len(res.step_t) - 1
    # per-step values follow the exact decay closely
    exact = np.exp(-res.step_t)
    assert np.max(np.abs(res.step_y[:, 0] - exact)) < 1e-4


def test_rejections_recovered():
    # oversized initial step on a fast-forced problem must be rejected
    def f(t, y):
        return np.array([-50.0 * (y[0] - np.cos(10.0 * t))])

    res = integrate_trbdf2(f, (0.0, 2.0), [0.0], reltol=1e-7, abstol=1e-9,
                           dt_init=0.5)
    assert res.success
    assert res.n_rejected > 0
    ref = solve_ivp(f, (0.0, 2.0), [0.0], method="Radau",
                    rtol=1e-11, atol=1e-13)
    assert abs(res.y[-1, 0] - ref.y[0, -1]) < 1e-5


def test_input_validation():
    f = lambda t, y: -y
    with pytest.raises(ValueError, match="t_end"):
        integrate_trbdf2(f, (1.0, 1.0), [1.0])
    with pytest.raises(ValueError, match="positive"):
        integrate_trbdf2(f, (0.0, 1.0), [1.0], reltol=-1e-6)
    with pytest.raises(ValueError, match="dt_init"):
        integrate_trbdf2(f, (0.0, 1.0), [1.0], dt_init=2.0, dt_max=1.0)
    with pytest.raises(ValueError, match="increasing"):
        integrate_trbdf2(f, (0.0, 1.0), [1.0], sample_times=[0.5, 0.2])
    with pytest.raises(ValueError, match="within"):
        integrate_trbdf2(f, (0.0, 1.0), [1.0], sample_times=[0.5, 2.0])
