"""Invariant suites and published-value regressions behind ``subharmonic selftest``."""

import time

import numpy as np

from . import quadrature
from .elliptic import complete_K, jacobi_sn_cn_dn
from .floquet import trace_criterion
from .linalg import eigvals
from .melnikov import existence_report, find_zero, melnikov_jacobian, melnikov_vector
from .odeint import integrate, integrate_with_variational
from .orbit import displacement, melnikov_flow_oracle
from .systems import ActionAnglePoint, CoupledOscillator, GeneralizedEuler, LinearOscillator, \
    ResonanceSpec

__all__ = ["random_points", "geometric_residuals", "liouville_residual", "oracle_mismatch",
           "invariant_checks", "published_checks", "run_checks"]

EULER_ZERO = np.array([0.0, 3.0 / np.sqrt(2.0), 3.0 / (2.0 * np.sqrt(2.0))])
OSCILLATOR_ZERO = ActionAnglePoint((5.0, 2.0, 1.0), np.pi)


def random_points(model, rng, count, spread=0.2):
    """Random cross-section points around the model's reference level."""
    ref = np.asarray(model.reference_level, dtype=float)
    points = []
    while len(points) < count:
        I = ref * (1.0 + spread * rng.uniform(-1.0, 1.0, ref.size))
        if model.level_in_domain(I):
            points.append(ActionAnglePoint(tuple(I), rng.uniform(0.0, model.T)))
    return points


def geometric_residuals(model, point, h=1e-5):
    """Residuals of the parametrization identities at one point.

    Keys: ``perpendicular`` (DI . f0), ``levels`` (I(G) - I),
    ``theta`` (dG/dtheta - f0 / Omega, by central differences) and
    ``dI`` (DI . G_I - identity).
    """
    I = np.asarray(point.I)
    th = point.theta0
    x = model.parametrization(I, th)
    DI = model.integral_gradients(x)
    f0 = model.f0(x)
    dG = (model.parametrization(I, th + h) - model.parametrization(I, th - h)) / (2.0 * h)
    GI = model.parametrization_dI(I, th)
    scale = max(1.0, float(np.linalg.norm(f0)))
    return {
        "perpendicular": float(np.max(np.abs(DI @ f0))) / scale,
        "levels": float(np.max(np.abs(model.integrals(x) - I))),
        "theta": float(np.max(np.abs(dG - f0 / model.omega(I)))) / scale,
        "dI": float(np.max(np.abs(DI @ GI - np.eye(I.size)))),
    }


def liouville_residual(model, x0, eps, t1, rel_tol=1e-11, abs_tol=1e-13):
    """Relative mismatch of ``det M`` against ``exp(int tr J)`` along the orbit."""
    traj = integrate(model.field(eps), x0, 0.0, t1, rel_tol, abs_tol, dense=True,
                     domain=model.field_domain)
    _, M = integrate_with_variational(model.field(eps), model.jacobian(eps), x0, 0.0, t1,
                                      rel_tol, abs_tol, domain=model.field_domain)
    jac = model.jacobian(eps)

    def trace(t):
        xs = traj.dense(t)
        return np.array([np.trace(jac(ti, xi)) for ti, xi in zip(t, xs)])

    integral, _ = quadrature.gauss_kronrod(trace, 0.0, t1, 1e-12, 1e-12)
    expected = np.exp(integral)
    return abs(np.linalg.det(M) - expected) / abs(expected)


def oracle_mismatch(model, point, res, degenerate, rel=1e-4, floor=1e-8):
    """Largest ``|M - oracle| / max(rel |oracle|, floor)``; at most 1 passes."""
    M = melnikov_vector(model, point, res, "degenerate" if degenerate else "nondegenerate")
    oracle = melnikov_flow_oracle(model, point, res, degenerate=degenerate)
    return float(np.max(np.abs(M - oracle) / np.maximum(rel * np.abs(oracle), floor)))


def _elliptic_identities():
    u = np.linspace(-20.0, 20.0, 1000)
    worst = 0.0
    for k in (0.0, 0.3, 0.5, 0.9, 0.999):
        sn, cn, dn = jacobi_sn_cn_dn(u, k)
        worst = max(worst, np.max(np.abs(sn ** 2 + cn ** 2 - 1.0)),
                    np.max(np.abs(dn ** 2 + k * k * sn ** 2 - 1.0)))
    return worst <= 1e-12, f"max identity residual {worst:.2e} (tol 1e-12)"


def _complete_k():
    k = 0.5
    val, _ = quadrature.gauss_kronrod(
        lambda s: 1.0 / np.sqrt(1.0 - (k * np.sin(s)) ** 2), 0.0, np.pi / 2, 1e-14, 1e-14)
    err = abs(complete_K(k) - val) / val
    return err <= 1e-10, f"K(0.5) relative error {err:.2e} (tol 1e-10)"


def _geometry(model, rng):
    tol = {"perpendicular": 1e-10, "levels": 1e-10, "theta": 1e-6, "dI": 1e-8}
    worst = dict.fromkeys(tol, 0.0)
    for p in random_points(model, rng, 20):
        for key, v in geometric_residuals(model, p).items():
            worst[key] = max(worst[key], v)
    ok = all(worst[k] <= tol[k] for k in tol)
    return ok, ", ".join(f"{k} {worst[k]:.1e}" for k in tol)


def _zero_displacement(model, rng):
    worst = 0.0
    for p in random_points(model, rng, 3):
        worst = max(worst, float(np.max(np.abs(displacement(model, p, 0.0, ResonanceSpec(1, 1))))))
    return worst <= 1e-8, f"max |Delta(z,0)| {worst:.2e} (tol 1e-8)"


def invariant_checks():
    rng = np.random.default_rng(20240611)
    euler = GeneralizedEuler()
    osc = CoupledOscillator()
    lin = LinearOscillator(forcing=0.2, damping=1.0)
    res = ResonanceSpec(1, 1)

    def geometry():
        results = [_geometry(m, rng) for m in (lin, euler, osc)]
        return all(r[0] for r in results), "; ".join(r[1] for r in results)

    def zero_disp():
        results = [_zero_displacement(m, rng) for m in (euler, osc)]
        return all(r[0] for r in results), "; ".join(r[1] for r in results)

    def oracle():
        worst = max(oracle_mismatch(euler, ActionAnglePoint(EULER_ZERO[1:], 0.3), res, False),
                    oracle_mismatch(osc, ActionAnglePoint((5.0, 2.0, 1.0), 2.0), res, True),
                    oracle_mismatch(lin, ActionAnglePoint((0.8,), 1.0), res, False))
        return worst <= 1.0, f"worst normalized mismatch {worst:.2e} (pass <= 1)"

    def liouville():
        x0 = osc.parametrization(np.array([5.0, 2.0, 1.0]), 0.5)
        r = liouville_residual(osc, x0, 0.1, osc.T)
        return r <= 1e-6, f"relative det/exp(trace) mismatch {r:.2e} (tol 1e-6)"

    def unit_multiplier():
        x0 = euler.parametrization(EULER_ZERO[1:], 0.0)
        _, M = integrate_with_variational(euler.field(0.0), euler.jacobian(0.0), x0, 0.0,
                                          euler.T, 1e-11, 1e-13)
        d = float(np.min(np.abs(eigvals(M) - 1.0)))
        return d <= 1e-6, f"|mu - 1| {d:.2e} (tol 1e-6)"

    return [
        ("elliptic identities", _elliptic_identities),
        ("complete K vs quadrature", _complete_k),
        ("parametrization identities", geometry),
        ("zero displacement at eps=0", zero_disp),
        ("Melnikov vs flow oracle", oracle),
        ("Liouville det-trace", liouville),
        ("unit multiplier at eps=0", unit_multiplier),
    ]


def published_checks():
    euler = GeneralizedEuler()
    osc = CoupledOscillator()
    res = ResonanceSpec(1, 1)

    def euler_zero():
        p = find_zero(euler, ActionAnglePoint((2.0, 1.0), 0.1), res)
        z = p.as_z()
        d_theta = abs((z[0] + euler.T / 2) % euler.T - euler.T / 2)
        err = max(d_theta, float(np.max(np.abs(z[1:] - EULER_ZERO[1:]))))
        return err <= 1e-4, f"distance to reported zero {err:.2e} (tol 1e-4)"

    def euler_det():
        det = float(np.linalg.det(melnikov_jacobian(euler, EULER_ZERO, res, "nondegenerate")))
        return abs(det + 5.16) <= 0.05 * 5.16, f"det {det:.6g} (reported -5.16)"

    def oscillator_zero():
        r = existence_report(osc, OSCILLATOR_ZERO, res)
        m = float(np.max(np.abs(r.M)))
        ok = m <= 1e-6 and abs(r.det - 49.994) <= 0.02 * 49.994
        return ok, f"max |M| {m:.4g}, det {r.det:.6g} (reported 0, 49.9940)"

    def oscillator_trace():
        x0 = osc.parametrization(np.array([5.0, 2.0, 1.0]), np.pi)
        lam = trace_criterion(osc, x0, 0.1, osc.T) / 0.1
        return abs(lam - 0.0054) <= 0.1 * 0.0054, f"lambda/eps {lam:.6g} (reported 0.0054)"

    return [
        ("published Euler zero", euler_zero),
        ("published Euler determinant", euler_det),
        ("published oscillator zero", oscillator_zero),
        ("published oscillator trace", oscillator_trace),
    ]


def run_checks(include_published=True):
    """Run the suites; returns rows ``(name, passed, detail)``."""
    checks = invariant_checks() + (published_checks() if include_published else [])
    rows = []
    for name, fn in checks:
        start = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as err:  # a crashing check is a failing check
            passed, detail = False, f"error: {err}"
        rows.append((name, bool(passed), f"{detail} [{time.perf_counter() - start:.1f}s]"))
    return rows
