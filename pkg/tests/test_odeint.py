import io

import numpy as np
import pytest
from scipy.linalg import expm

from subharmonic import odeint
from subharmonic.errors import IntegrationError
from subharmonic.odeint import (Trajectory, fd_monodromy, final_state, format_float,
                                inhomogeneous_variational, integrate,
                                integrate_with_variational)
from subharmonic.orbit import richardson
from subharmonic.quadrature import gauss_kronrod


def rotation(t, x):
    return np.array([x[1], -x[0]])


def test_harmonic_full_turn():
    x = final_state(rotation, [1.0, 0.0], 0.0, 2 * np.pi)
    assert np.allclose(x, [1.0, 0.0], atol=1e-8)


def test_dense_output_and_sampling():
    traj = integrate(rotation, [1.0, 0.0], 0.0, 10.0, t_eval=np.linspace(0.0, 10.0, 37),
                     dense=True)
    assert np.all(np.diff(traj.times) > 0)
    assert len(traj.times) == len(traj.states) == 37
    assert np.allclose(traj.states[:, 0], np.cos(traj.times), atol=1e-8)
    t = np.linspace(0.0, 10.0, 501)
    assert np.allclose(traj.dense(t)[:, 1], -np.sin(t), atol=1e-8)


def test_euler_unperturbed_orbit_closes(euler):
    x0 = np.array([1.06066, 0.0, 2.12132])
    P = euler.period(euler.integrals(x0))
    x1 = final_state(euler.field(0.0), x0, 0.0, P)
    assert np.linalg.norm(x1 - x0) <= 1e-6


def test_linear_monodromy_is_matrix_exponential(rng):
    A = rng.normal(size=(3, 3))
    _, M = integrate_with_variational(lambda t, x: A @ x, lambda t, x: A, np.ones(3), 0.0, 1.3)
    assert np.allclose(M, expm(1.3 * A), atol=1e-8)


def test_rotation_monodromy_identity():
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    _, M = integrate_with_variational(rotation, lambda t, x: J, [1.0, 0.0], 0.0, 2 * np.pi)
    assert np.allclose(M, np.eye(2), atol=1e-8)


def test_fd_monodromy_matches_variational(euler):
    x0 = euler.parametrization(np.array([2.0, 0.9]), 0.4)
    _, M = integrate_with_variational(euler.field(0.01), euler.jacobian(0.01), x0, 0.0, 1.5,
                                      1e-12, 1e-14)
    assert np.allclose(fd_monodromy(euler.field(0.01), x0, 0.0, 1.5, 1e-12, 1e-14), M,
                       atol=1e-6)


def test_inhomogeneous_scalar():
    final, dense = inhomogeneous_variational(lambda t: np.array([[1.0]]),
                                             lambda t: np.array([1.0]), 0.0, 1.0)
    assert final[0] == pytest.approx(np.e - 1.0, abs=1e-9)
    assert dense(0.5)[0] == pytest.approx(np.exp(0.5) - 1.0, abs=1e-9)


def test_first_order_correction_vs_two_flow_difference(oscillator):
    I = np.array([5.0, 2.0, 1.0])
    q = lambda t: oscillator.unperturbed_orbit(I, 0.7, t)
    x0 = q(0.0)
    L = oscillator.T
    x1, _ = inhomogeneous_variational(lambda t: oscillator.df0(q(t)),
                                      lambda t: oscillator.f1(q(t), t), 0.0, L,
                                      rel_tol=1e-12, abs_tol=1e-14)
    base = final_state(oscillator.field(0.0), x0, 0.0, L, 1e-13, 1e-15)
    ladder = (1e-3, 5e-4, 2.5e-4)
    quotients = [(final_state(oscillator.field(e), x0, 0.0, L, 1e-13, 1e-15) - base) / e
                 for e in ladder]
    oracle = richardson(quotients)
    assert np.max(np.abs(x1 - oracle)) <= 1e-5 * max(1.0, np.max(np.abs(oracle)))


def test_tolerance_halving_never_hurts(euler):
    x0 = euler.parametrization(np.array(euler.reference_level), 0.2)
    ref = final_state(euler.field(0.01), x0, 0.0, 5.0, 1e-13, 1e-15)
    errors = [np.linalg.norm(final_state(euler.field(0.01), x0, 0.0, 5.0, tol, tol * 1e-2) - ref)
              for tol in (1e-6, 5e-7, 2.5e-7, 1.25e-7)]
    assert all(b <= a * 1.05 for a, b in zip(errors, errors[1:]))


@pytest.mark.parametrize("name", ["euler", "oscillator"])
def test_integrals_conserved_at_zero_eps(name, request, res11):
    model = request.getfixturevalue(name)
    x0 = model.parametrization(np.array(model.reference_level), 0.3)
    traj = integrate(model.field(0.0), x0, 0.0, res11.window(model.T), model=model)
    assert np.max(traj.integral_drift) <= 1e-9


def test_liouville(oscillator):
    x0 = oscillator.parametrization(np.array([5.0, 2.0, 1.0]), 1.0)
    eps = 0.05
    traj = integrate(oscillator.field(eps), x0, 0.0, 4.0, 1e-12, 1e-14, dense=True)
    _, M = integrate_with_variational(oscillator.field(eps), oscillator.jacobian(eps), x0,
                                      0.0, 4.0, 1e-12, 1e-14)
    jac = oscillator.jacobian(eps)
    tr, _ = gauss_kronrod(lambda t: np.array([np.trace(jac(s, x))
                                              for s, x in zip(t, traj.dense(t))]), 0.0, 4.0)
    assert np.linalg.det(M) == pytest.approx(np.exp(tr), rel=1e-6)


def test_domain_exit_raises_with_state():
    # blow-up of x' = x^2 at t = 1 behind a domain guard
    with pytest.raises(IntegrationError) as info:
        integrate(lambda t, x: x ** 2, [1.0], 0.0, 2.0, domain=lambda x: x[0] < 100.0)
    assert info.value.t < 1.0
    assert info.value.state[0] < 100.0


@pytest.mark.parametrize("rel,abs_", [(0.0, 1e-12), (1e-10, 0.1), (-1.0, 1e-12)])
def test_bad_tolerances(rel, abs_):
    with pytest.raises(ValueError):
        integrate(rotation, [1.0, 0.0], 0.0, 1.0, rel, abs_)


def test_backwards_interval_rejected():
    with pytest.raises(ValueError):
        integrate(rotation, [1.0, 0.0], 1.0, 0.0)


def test_empty_interval_returns_initial_state():
    traj = integrate(rotation, [1.0, 0.0], 2.0, 2.0)
    assert np.array_equal(traj.final_state, [1.0, 0.0])


def test_csv_format():
    traj = Trajectory(np.array([0.0, 0.1]), np.array([[1.0, 1 / 3], [2.0, -1e-20]]))
    text = traj.to_csv()
    lines = text.split("\n")
    assert lines[0] == "t,x1,x2"
    assert "\r" not in text and text.endswith("\n")
    assert lines[1] == "0,1,0.33333333333333331"
    assert float(lines[2].split(",")[2]) == -1e-20
    buf = io.StringIO()
    traj.to_csv(buf)
    assert buf.getvalue() == text
    assert format_float(0.1) == "0.10000000000000001"
