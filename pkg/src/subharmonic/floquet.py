"""Floquet multipliers, exponents and stability verdicts for periodic orbits.

Two monodromy paths are available:

``"eqAt"``
    the first-order linearization ``A(t; eps) = df0(x0) + eps (df1(x0, t)
    + d2f0(x0) x1)`` along the unperturbed orbit ``x0(t)`` with its
    first-order correction ``x1(t)``;
``"refined"``
    the exact linearization about the Newton-refined perturbed orbit.

The two agree to O(eps^2).
"""

from dataclasses import dataclass

import numpy as np

from . import odeint, quadrature
from .linalg import eigvals
from .systems import ActionAnglePoint

__all__ = [
    "StabilityReport",
    "a_matrix",
    "orbit_point",
    "first_order_correction",
    "trace_criterion",
    "monodromy_eq_at",
    "monodromy_refined",
    "characteristic_multipliers",
    "characteristic_exponents",
    "classify",
    "MARGIN",
]

MARGIN = 1e-8

UNSTABLE = "unstable"
STABLE = "asymptotically_stable"
INCONCLUSIVE = "inconclusive"
PATHS = ("eqAt", "refined")


@dataclass
class StabilityReport:
    multipliers: np.ndarray
    exponents: np.ndarray
    lambda_eps: float
    verdict: str
    path: str
    det_monodromy: float = float("nan")

    def to_dict(self):
        pairs = lambda arr: [[float(np.real(v)), float(np.imag(v))] for v in arr]
        return {
            "multipliers": pairs(self.multipliers),
            "exponents": pairs(self.exponents),
            "lambda_eps": float(self.lambda_eps),
            "verdict": self.verdict,
            "path": self.path,
            "det_monodromy": float(self.det_monodromy),
        }


def a_matrix(model, t, eps, orbit_state, x1_state):
    """``df0(x0) + eps (df1(x0, t) + d2f0(x0) . x1)``."""
    x0 = np.asarray(orbit_state, dtype=float)
    A = np.array(model.df0(x0), dtype=float)
    if eps == 0.0:
        return A
    x1 = np.asarray(x1_state, dtype=float)
    return A + eps * (model.df1(x0, t) + np.einsum("ijk,k->ij", model.d2f0(x0), x1))


def orbit_point(model, x0_star):
    """Action-angle coordinates of a state on an unperturbed orbit."""
    x = np.asarray(x0_star, dtype=float)
    return ActionAnglePoint(tuple(model.integrals(x)), model.recover_angle(x, 0.0))


def first_order_correction(model, x0_star, period, rel_tol=1e-11, abs_tol=1e-13):
    """Closed-form unperturbed orbit through ``x0_star`` and the dense
    first-order correction ``x1(t)`` on ``[0, period]``.

    Returns ``(q, x1)`` where both are callables of time.
    """
    point = orbit_point(model, x0_star)
    I = np.asarray(point.I)

    def q(t):
        return model.unperturbed_orbit(I, point.theta0, t)

    _, x1 = odeint.inhomogeneous_variational(
        lambda t: model.df0(q(t)), lambda t: model.f1(q(t), t, 0.0), 0.0, period,
        n=model.N, rel_tol=rel_tol, abs_tol=abs_tol)
    return q, x1


def trace_criterion(model, x0_star, eps, period, abs_tol=1e-12, rel_tol=1e-10):
    """Average trace ``(1/nT) int_0^{nT} Tr A(t; eps) dt`` along the orbit."""
    q, x1 = first_order_correction(model, x0_star, period)

    def integrand(t):
        states = q(t)
        corr = x1(t)
        out = np.empty(t.size)
        for i, ti in enumerate(t):
            out[i] = np.trace(a_matrix(model, ti, eps, states[:, i], corr[i]))
        return out

    value, _ = quadrature.gauss_kronrod(integrand, 0.0, period, abs_tol, rel_tol)
    return value / period


def monodromy_eq_at(model, x0_star, eps, period, rel_tol=1e-11, abs_tol=1e-13):
    """Monodromy of ``Y' = A(t; eps) Y`` over ``[0, period]``.

    The correction ``x1`` is integrated jointly with ``Y`` so no
    interpolation enters the matrix.
    """
    point = orbit_point(model, x0_star)
    I = np.asarray(point.I)
    n = model.N

    def rhs(t, z):
        x0 = model.unperturbed_orbit(I, point.theta0, t)
        x1 = z[:n]
        Y = z[n:].reshape(n, n)
        dx1 = model.df0(x0) @ x1 + model.f1(x0, t, 0.0)
        return np.concatenate([dx1, (a_matrix(model, t, eps, x0, x1) @ Y).ravel()])

    z0 = np.concatenate([np.zeros(n), np.eye(n).ravel()])
    z1 = odeint.final_state(rhs, z0, 0.0, period, rel_tol, abs_tol)
    return z1[n:].reshape(n, n)


def monodromy_refined(model, record, rel_tol=1e-11, abs_tol=1e-13):
    """Monodromy of the full linearization about ``record.x0_star``."""
    _, M = odeint.integrate_with_variational(
        model.field(record.epsilon), model.jacobian(record.epsilon),
        record.x0_star, 0.0, record.period, rel_tol, abs_tol)
    return M


def _monodromy(model, record, path):
    if path == "refined":
        return monodromy_refined(model, record)
    if path == "eqAt":
        return monodromy_eq_at(model, record.predicted_seed, record.epsilon, record.period)
    raise ValueError(f"path must be one of {PATHS}")


def characteristic_multipliers(model, record, path="refined"):
    """Eigenvalues of the monodromy matrix (in-repo QR iteration)."""
    return eigvals(_monodromy(model, record, path))


def characteristic_exponents(multipliers, period):
    """Principal-branch ``log(mu) / period``."""
    mu = np.asarray(multipliers, dtype=complex)
    return np.log(mu) / period


def classify(model, record, path="refined", margin=MARGIN):
    """Stability verdict from multipliers and the trace criterion.

    ``unstable`` if some exponent or the average trace exceeds ``margin``;
    ``asymptotically_stable`` if every exponent has real part below
    ``-margin``; ``inconclusive`` otherwise.
    """
    M = _monodromy(model, record, path)
    mult = eigvals(M)
    exps = characteristic_exponents(mult, record.period)
    lam = trace_criterion(model, record.predicted_seed, record.epsilon, record.period)
    re = np.real(exps)
    if np.any(re > margin) or lam > margin:
        verdict = UNSTABLE
    elif np.all(re < -margin):
        verdict = STABLE
    else:
        verdict = INCONCLUSIVE
    return StabilityReport(mult, exps, float(lam), verdict, path, float(np.linalg.det(M)))
