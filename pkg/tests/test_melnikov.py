import json

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import EULER_ZERO, OSCILLATOR_ZERO
from subharmonic.errors import DomainError, SingularJacobianError
from subharmonic.melnikov import (CASE_A, CASE_B, DEGENERATE, INCONCLUSIVE, NONDEGENERATE,
                                  classify_case, existence_report, find_zero,
                                  melnikov_angle_degenerate, melnikov_angle_nondegenerate,
                                  melnikov_jacobian, melnikov_vector, zero_map)
from subharmonic.orbit import melnikov_flow_oracle
from subharmonic.systems import ActionAnglePoint, LinearOscillator, ResonanceSpec

F, MU = 0.2, 1.0


def forced_closed_form(I, theta0):
    # first-order energy gain and scaled phase shift over one forcing period
    m1 = 2 * np.pi * (MU * I * (1 - I) - F * np.sqrt(I) * np.sin(theta0))
    m2 = -(F / np.sqrt(I)) * np.pi * np.cos(theta0)
    return np.array([m1, m2])


FORCED_ZERO_I = brentq(lambda I: np.sqrt(I) * (1 - I) - F, 0.3, 0.99)


@pytest.mark.parametrize("I,theta0", [(0.5, 0.0), (0.8, 1.0), (1.3, 4.0), (0.2, 2.5)])
def test_forced_oscillator_closed_form(forced, res11, I, theta0):
    M = melnikov_vector(forced, ActionAnglePoint((I,), theta0), res11)
    assert np.allclose(M, forced_closed_form(I, theta0), atol=1e-10)


def test_classification(forced, euler, oscillator):
    assert classify_case(forced, np.array([0.7])) == DEGENERATE
    assert classify_case(oscillator, np.array([5.0, 2.0, 1.0])) == DEGENERATE
    assert classify_case(euler, np.array(EULER_ZERO.I)) == NONDEGENERATE


def test_find_zero_forced(forced, res11):
    p = find_zero(forced, ActionAnglePoint((0.8,), 1.4), res11)
    assert p.I[0] == pytest.approx(FORCED_ZERO_I, abs=1e-8)
    assert p.theta0 == pytest.approx(np.pi / 2, abs=1e-8)
    r = existence_report(forced, p, res11)
    assert r.verdict == CASE_B and r.reasons == []


def test_find_zero_euler_reported_point(euler, res11):
    p, info = find_zero(euler, ActionAnglePoint((2.12, 1.06), 0.01), res11, return_info=True)
    d_theta = abs((p.theta0 + euler.T / 2) % euler.T - euler.T / 2)
    assert d_theta < 1e-6
    assert np.allclose(p.I, EULER_ZERO.I, atol=1e-6)
    assert abs(euler.omega(np.array(p.I)) * euler.T - euler.T) <= 1e-10 * euler.T
    assert info["residual"] <= 1e-8


def test_euler_report_case_a(euler, res11):
    r = existence_report(euler, EULER_ZERO, res11)
    assert r.case == NONDEGENERATE
    assert np.max(np.abs(r.M[:-1])) <= 1e-6
    assert r.verdict == CASE_A
    assert r.jacobian[-1, 0] == 0.0
    doc = json.loads(json.dumps(r.to_dict()))
    assert set(doc) >= {"point", "resonance", "case", "M", "jacobian", "det", "verdict"}


def test_degenerate_jacobian_matches_manual_difference(forced, res11):
    z = np.array([1.0, 0.6])
    J = melnikov_jacobian(forced, z, res11, DEGENERATE)
    h = 1e-6
    col = (forced_closed_form(0.6, 1.0 + h) - forced_closed_form(0.6, 1.0 - h)) / (2 * h)
    assert np.allclose(J[:, 0], col, atol=1e-6)


def test_linearity_in_perturbation(res11):
    both = LinearOscillator(forcing=0.3, damping=0.7)
    only_f = LinearOscillator(forcing=0.3)
    only_d = LinearOscillator(damping=0.7)
    p = ActionAnglePoint((0.9,), 0.4)
    total = melnikov_vector(both, p, res11, DEGENERATE)
    parts = melnikov_vector(only_f, p, res11, DEGENERATE) + melnikov_vector(only_d, p, res11,
                                                                           DEGENERATE)
    assert np.allclose(total, parts, atol=1e-10)


def test_linearity_with_custom_perturbations(euler, res11):
    g = lambda x, t, eps=0.0: np.array([np.cos(t) * x[1], 0.0 * x[0], 0.3 * x[0]])
    h = lambda x, t, eps=0.0: np.array([0.0 * x[0], x[2] * np.sin(2 * t), 0.1 + 0.0 * x[0]])
    gh = lambda x, t, eps=0.0: g(x, t) + h(x, t)
    p = ActionAnglePoint((2.0, 0.9), 0.5)
    vg = melnikov_vector(euler.with_perturbation(g), p, res11, NONDEGENERATE)
    vh = melnikov_vector(euler.with_perturbation(h), p, res11, NONDEGENERATE)
    vgh = melnikov_vector(euler.with_perturbation(gh), p, res11, NONDEGENERATE)
    assert np.allclose(vgh, vg + vh, atol=1e-9)


@pytest.mark.parametrize("name,point", [("forced", ActionAnglePoint((0.7,), 2.0)),
                                        ("oscillator", ActionAnglePoint((5.0, 2.0, 1.0), 1.0))])
def test_case_b_reduction(name, point, request, res11):
    model = request.getfixturevalue(name)
    om = model.omega(np.array(point.I))
    assert melnikov_angle_nondegenerate(model, point, res11) == pytest.approx(
        om * melnikov_angle_degenerate(model, point, res11), abs=1e-9)


def test_oracle_agreement_euler(euler, res11):
    p = ActionAnglePoint((2.2, 1.0), 0.8)
    M = melnikov_vector(euler, p, res11, NONDEGENERATE)
    oracle = melnikov_flow_oracle(euler, p, res11)
    assert np.all(np.abs(M - oracle) <= np.maximum(1e-4 * np.abs(oracle), 1e-8))


def test_oracle_agreement_oscillator(oscillator, res11):
    p = ActionAnglePoint((4.0, 2.5, 1.5), 2.0)
    M = melnikov_vector(oscillator, p, res11, DEGENERATE)
    oracle = melnikov_flow_oracle(oscillator, p, res11, degenerate=True)
    assert np.all(np.abs(M - oracle) <= np.maximum(1e-4 * np.abs(oracle), 1e-8))


def test_no_perturbation_is_inconclusive(res11):
    free = LinearOscillator()
    r = existence_report(free, ActionAnglePoint((1.0,), 0.0), res11)
    assert np.all(r.M == 0.0)
    assert r.verdict == INCONCLUSIVE
    assert "perturbation is identically zero" in r.reasons
    # the map vanishes identically, so any guess is returned unchanged
    assert find_zero(free, ActionAnglePoint((1.0,), 0.5), res11) == ActionAnglePoint((1.0,), 0.5)


def test_singular_jacobian(res11):
    # damping alone leaves the phase row identically zero
    damped = LinearOscillator(damping=1.0)
    with pytest.raises(SingularJacobianError):
        find_zero(damped, ActionAnglePoint((0.8,), 0.5), res11)


def test_non_resonant_level_is_inconclusive(euler):
    r = existence_report(euler, ActionAnglePoint((2.0, 1.0), 0.0), ResonanceSpec(1, 1))
    assert r.verdict == INCONCLUSIVE
    assert any("resonant" in reason for reason in r.reasons)


def test_zero_map_resonance_row(euler, res11):
    F0 = zero_map(euler, EULER_ZERO, res11, NONDEGENERATE)
    assert abs(F0[-1]) < 1e-10


def test_outside_domain(euler, res11):
    with pytest.raises(DomainError):
        melnikov_vector(euler, ActionAnglePoint((1.0, 2.0), 0.0), res11)
    with pytest.raises(DomainError):
        find_zero(euler, ActionAnglePoint((1.0, 2.0), 0.0), res11)


def test_oscillator_vector_is_finite(oscillator, res11):
    r = existence_report(oscillator, OSCILLATOR_ZERO, res11)
    assert r.case == DEGENERATE
    assert np.all(np.isfinite(r.M)) and np.isfinite(r.det)
