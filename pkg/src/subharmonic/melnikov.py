"""Melnikov vector for subharmonic orbits of perturbed integrable systems.

Along the unperturbed orbit ``q(t) = G(I0, theta0 + Omega(I0) t)`` the
first-order changes over one resonant window ``[0, nT]`` are

* action components ``M_i = int DI_i(q) . f1(q, t, 0) dt`` (i < N),
* the phase component, which in the non-degenerate case is
  ``sum_i dOmega/dI_i int_0^{nT} int_0^t DI_i . f1 ds dt + Omega int h dt``
  and in the degenerate case (constant Omega) is the scaled
  ``int h dt``, where
  ``h = [f0 . f1 - sum_i (f0 . G_{I_i}) (DI_i . f1)] / |f0|^2``.

The repeated integral is evaluated as ``int_0^{nT} (nT - s) g(s) ds``
(Cauchy's formula), so every component comes out of one vectorized
adaptive quadrature.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from . import quadrature
from .errors import DomainError, SingularJacobianError, ConvergenceError
from .systems import ActionAnglePoint, ResonanceSpec, resonance_check

__all__ = [
    "MelnikovResult",
    "classify_case",
    "melnikov_integrals",
    "melnikov_action_components",
    "melnikov_angle_nondegenerate",
    "melnikov_angle_degenerate",
    "melnikov_vector",
    "melnikov_jacobian",
    "zero_map",
    "find_zero",
    "existence_report",
    "det_scale",
]

log = logging.getLogger(__name__)

NONDEGENERATE = "nondegenerate"
DEGENERATE = "degenerate"

CASE_A = "case_a_satisfied"
CASE_B = "case_b_satisfied"
INCONCLUSIVE = "inconclusive"

DEGENERACY_TOL = 1e-8
QUAD_ABS_TOL = 1e-11
QUAD_REL_TOL = 1e-12


@dataclass
class MelnikovResult:
    """Melnikov vector, Jacobian and verdict at a cross-section point."""

    point: ActionAnglePoint
    resonance: ResonanceSpec
    case: str
    M: np.ndarray
    jacobian: np.ndarray
    det: float
    verdict: str = INCONCLUSIVE
    reasons: list = field(default_factory=list)

    def to_dict(self):
        return {
            "point": self.point.to_dict(),
            "resonance": None if self.resonance is None else self.resonance.to_dict(),
            "case": self.case,
            "M": [float(v) for v in self.M],
            "jacobian": [[float(v) for v in row] for row in self.jacobian],
            "det": float(self.det),
            "verdict": self.verdict,
            "reasons": list(self.reasons),
        }


def _point(z0):
    if isinstance(z0, ActionAnglePoint):
        return z0
    return ActionAnglePoint.from_z(z0)


def classify_case(model, I, tol=DEGENERACY_TOL):
    """``"degenerate"`` when ``|grad Omega(I)| < tol``, else ``"nondegenerate"``."""
    g = model.omega_gradient(np.asarray(I, dtype=float))
    return DEGENERATE if float(np.linalg.norm(g)) < tol else NONDEGENERATE


def melnikov_integrals(model, z0, res, abs_tol=QUAD_ABS_TOL, rel_tol=QUAD_REL_TOL):
    """All Melnikov integrals at ``z0`` from a single quadrature.

    Returns
    -------
    dict
        ``actions`` (N-1,), ``weighted`` (N-1,) with the repeated integrals
        ``int_0^L int_0^t DI_i . f1``, and ``phase`` (the integral of h).
    """
    point = _point(z0)
    I = model.check_level(point.I)
    theta0 = point.theta0
    Om = model.omega(I)
    L = res.window(model.T)
    k = I.size

    if not model.has_perturbation:
        zeros = np.zeros(k)
        return {"actions": zeros, "weighted": zeros.copy(), "phase": 0.0}

    def integrand(t):
        theta = theta0 + Om * t
        q = model.parametrization(I, theta)
        f1 = model.f1(q, t, 0.0)
        DI = model.integral_gradients(q)
        g = np.einsum("ijn,jn->in", DI, f1)
        f0 = model.f0(q)
        nf = np.sum(f0 * f0, axis=0)
        if np.any(nf == 0.0):
            raise DomainError("the unperturbed orbit passes through an equilibrium")
        GI = model.parametrization_dI(I, theta)
        fg = np.einsum("jn,jin->in", f0, GI)
        h = (np.sum(f0 * f1, axis=0) - np.sum(fg * g, axis=0)) / nf
        return np.vstack([g, (L - t) * g, h[None, :]])

    vals, _ = quadrature.integrate(integrand, 0.0, L, abs_tol, rel_tol)
    return {"actions": vals[:k], "weighted": vals[k:2 * k], "phase": float(vals[-1])}


def melnikov_action_components(model, z0, res, **tol):
    """Action components ``(M_1, ..., M_{N-1})``."""
    return melnikov_integrals(model, z0, res, **tol)["actions"]


def melnikov_angle_nondegenerate(model, z0, res, **tol):
    """First-order phase displacement in the non-degenerate case."""
    point = _point(z0)
    parts = melnikov_integrals(model, point, res, **tol)
    I = np.asarray(point.I)
    grad = model.omega_gradient(I)
    return float(grad @ parts["weighted"] + model.omega(I) * parts["phase"])


def melnikov_angle_degenerate(model, z0, res, **tol):
    """Scaled phase component ``int h dt`` used when Omega is constant."""
    return melnikov_integrals(model, z0, res, **tol)["phase"]


def melnikov_vector(model, z0, res, case=None, **tol):
    """Full Melnikov vector ``(M_1, ..., M_N)`` for the given case.

    The last component is the non-degenerate phase displacement or the
    degenerate scaled one.  ``case=None`` classifies automatically.
    """
    point = _point(z0)
    I = np.asarray(point.I)
    if case is None:
        case = classify_case(model, I)
    parts = melnikov_integrals(model, point, res, **tol)
    if case == DEGENERATE:
        last = parts["phase"]
    else:
        last = float(model.omega_gradient(I) @ parts["weighted"]
                     + model.omega(I) * parts["phase"])
    return np.concatenate([parts["actions"], [last]])


def _fd_steps(z):
    return np.maximum(1e-5, 1e-5 * np.abs(z))


def _rows(model, z, res, case, **tol):
    point = ActionAnglePoint.from_z(z)
    if case == NONDEGENERATE:
        actions = melnikov_integrals(model, point, res, **tol)["actions"]
        return np.concatenate([actions, [model.omega(np.asarray(point.I)) * res.window(model.T)]])
    return melnikov_vector(model, point, res, DEGENERATE, **tol)


def melnikov_jacobian(model, z0, res, case, **tol):
    """Jacobian of the existence map by central differences.

    Rows are ``(M_1, ..., M_{N-1}, Omega nT)`` for the non-degenerate case
    and ``(M_1, ..., M_N)`` for the degenerate case; columns are
    derivatives with respect to ``(theta0, I_1, ..., I_{N-1})``.  Steps are
    ``max(1e-5, 1e-5 |z_j|)``.
    """
    z = _point(z0).as_z()
    h = _fd_steps(z)
    n = z.size
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h[j]
        J[:, j] = (_rows(model, z + e, res, case, **tol)
                   - _rows(model, z - e, res, case, **tol)) / (2.0 * h[j])
    if case == NONDEGENERATE:
        J[-1, 0] = 0.0
    return J


def zero_map(model, z0, res, case, **tol):
    """The map whose zeros ``find_zero`` seeks.

    Non-degenerate: ``(M_1..M_{N-1}, Omega(I) nT - m T)``.
    Degenerate: ``(M_1..M_N)``.
    """
    point = _point(z0)
    if case == NONDEGENERATE:
        actions = melnikov_integrals(model, point, res, **tol)["actions"]
        om = model.omega(np.asarray(point.I))
        return np.concatenate([actions, [om * res.window(model.T) - res.m * model.T]])
    return melnikov_vector(model, point, res, DEGENERATE, **tol)


def det_scale(J):
    """``|J|_F ** n``, an upper bound for ``|det J|``.

    A global norm is used rather than the product of row norms so that a
    row made only of finite-difference noise is recognised as negligible.
    """
    return float(np.linalg.norm(J)) ** J.shape[0]


def _safe_map(model, z, res, case, **tol):
    point = ActionAnglePoint.from_z(z)
    if not model.level_in_domain(point.I):
        return None
    try:
        return zero_map(model, point, res, case, **tol)
    except DomainError:
        return None


def find_zero(model, guess, res, case=None, tol=1e-8, resonance_tol=1e-10,
              max_iter=50, return_info=False, **quad_tol):
    """Newton iteration for a zero of :func:`zero_map`.

    In the non-degenerate case the resonance condition is one of the
    equations, so the returned level is resonant to ``resonance_tol * T``.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations without convergence.
    SingularJacobianError
        When ``|det J|`` falls below ``1e-12`` times its norm bound.
    """
    point = _point(guess)
    z = point.as_z()
    if case is None:
        case = classify_case(model, point.I)
    F = _safe_map(model, z, res, case, **quad_tol)
    if F is None:
        raise DomainError(f"initial guess {point} is outside the domain")

    def converged(F):
        if case == NONDEGENERATE:
            return (np.max(np.abs(F[:-1]), initial=0.0) <= tol
                    and abs(F[-1]) <= resonance_tol * model.T)
        return np.max(np.abs(F)) <= tol

    iterations = 0
    while not converged(F):
        if iterations >= max_iter:
            raise ConvergenceError(
                f"Melnikov zero search did not converge in {max_iter} iterations "
                f"(|F| = {np.max(np.abs(F)):.3e})")
        J = melnikov_jacobian(model, z, res, case, **quad_tol)
        scale = det_scale(J)
        if scale == 0.0 or abs(np.linalg.det(J)) < 1e-12 * scale:
            raise SingularJacobianError(f"singular Melnikov Jacobian at z={z}")
        step = np.linalg.solve(J, -F)
        norm0 = float(np.linalg.norm(F))
        lam = 1.0
        for _ in range(30):
            trial = z + lam * step
            Ft = _safe_map(model, trial, res, case, **quad_tol)
            if Ft is not None and float(np.linalg.norm(Ft)) < norm0:
                break
            lam *= 0.5
        else:
            raise ConvergenceError(f"Newton line search failed at z={z}")
        z, F = trial, Ft
        iterations += 1
        log.debug("find_zero iteration %d: |F| = %.3e", iterations, np.max(np.abs(F)))

    result = ActionAnglePoint.from_z(z).wrapped(model.T)
    if return_info:
        return result, {"iterations": iterations, "residual": float(np.max(np.abs(F)))}
    return result


def existence_report(model, z0, res=None, zero_tol=1e-6, degeneracy_tol=DEGENERACY_TOL,
                     det_rel_tol=1e-6, resonance_tol=1e-8, **quad_tol):
    """Evaluate the existence conditions at ``z0``.

    Checks the zero conditions of the active case (actions only in the
    non-degenerate case, all N components in the degenerate one), the
    resonance of the level and a determinant that is not negligible
    relative to its norm bound.
    """
    point = _point(z0)
    I = np.asarray(point.I)
    reasons = []
    if res is None:
        res = resonance_check(model, I, resonance_tol)
    window_res = res if res is not None else ResonanceSpec(1, 1)
    if res is None:
        reasons.append("level is not resonant")
    elif abs(res.m * model.period(I) - res.n * model.T) >= resonance_tol * model.T:
        reasons.append(f"level is not ({res.m},{res.n})-resonant")

    case = classify_case(model, I, degeneracy_tol)
    M = melnikov_vector(model, point, window_res, case, **quad_tol)
    J = melnikov_jacobian(model, point, window_res, case, **quad_tol)
    det = float(np.linalg.det(J))

    if not model.has_perturbation:
        reasons.append("perturbation is identically zero")
    checked = M[:-1] if case == NONDEGENERATE else M
    if np.max(np.abs(checked)) > zero_tol:
        reasons.append("Melnikov zero conditions not met")
    scale = det_scale(J)
    if scale == 0.0 or abs(det) <= det_rel_tol * scale:
        reasons.append("Jacobian determinant is negligible")

    if reasons:
        verdict = INCONCLUSIVE
    else:
        verdict = CASE_A if case == NONDEGENERATE else CASE_B
    return MelnikovResult(point, res, case, M, J, det, verdict, reasons)
