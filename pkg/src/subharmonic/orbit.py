"""Displacement map, periodic-orbit refinement and return verification."""

from dataclasses import dataclass, field, asdict
import io
import logging

import numpy as np

from . import odeint
from .errors import ConvergenceError, IntegrationError
from .odeint import format_float
from .systems import ActionAnglePoint

__all__ = [
    "PeriodicOrbitRecord",
    "displacement",
    "melnikov_flow_oracle",
    "richardson",
    "refine_periodic_orbit",
    "verify_orbit",
    "returns_csv",
    "RICHARDSON_LADDER",
]

log = logging.getLogger(__name__)

RICHARDSON_LADDER = (1e-3, 5e-4, 2.5e-4)


@dataclass
class PeriodicOrbitRecord:
    """A (refined) periodic orbit of the perturbed system.

    ``newton_residual`` is ``|phi(nT, x0_star) - x0_star|``; ``converged``
    tells whether it reached the refinement tolerance.
    """

    epsilon: float
    x0_star: np.ndarray
    period: float
    newton_residual: float
    predicted_seed: np.ndarray
    cycles_verified: int = 0
    per_cycle_return_distance: list = field(default_factory=list)
    converged: bool = True
    iterations: int = 0

    @property
    def seed_offset(self):
        return float(np.linalg.norm(np.asarray(self.x0_star) - np.asarray(self.predicted_seed)))

    def within_seed_bound(self, C=10.0):
        """``|x0_star - predicted_seed| <= C |eps|``."""
        return self.seed_offset <= C * abs(self.epsilon) + 1e-12

    def to_dict(self):
        d = asdict(self)
        d["x0_star"] = [float(v) for v in self.x0_star]
        d["predicted_seed"] = [float(v) for v in self.predicted_seed]
        d["per_cycle_return_distance"] = [float(v) for v in self.per_cycle_return_distance]
        d["epsilon"] = float(self.epsilon)
        d["period"] = float(self.period)
        d["newton_residual"] = float(self.newton_residual)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            epsilon=float(d["epsilon"]),
            x0_star=np.array(d["x0_star"], dtype=float),
            period=float(d["period"]),
            newton_residual=float(d["newton_residual"]),
            predicted_seed=np.array(d["predicted_seed"], dtype=float),
            cycles_verified=int(d.get("cycles_verified", 0)),
            per_cycle_return_distance=list(d.get("per_cycle_return_distance", [])),
            converged=bool(d.get("converged", True)),
            iterations=int(d.get("iterations", 0)),
        )


def displacement(model, z0, eps, res, rel_tol=1e-12, abs_tol=1e-14):
    """Change of ``(I, theta)`` after integrating the full system over ``[0, nT]``.

    Returns ``(I(x(nT)) - I0, theta(nT) - theta0 - Omega(I0) nT)`` where
    the final phase is recovered from the parametrization continuously
    from its unperturbed value, so the last entry is ``eps * M_N + O(eps^2)``
    in the non-degenerate normalization (before dividing by Omega in the
    degenerate one).
    """
    point = z0 if isinstance(z0, ActionAnglePoint) else ActionAnglePoint.from_z(z0)
    I0 = model.check_level(point.I)
    L = res.window(model.T)
    x0 = model.parametrization(I0, point.theta0)
    x1 = odeint.final_state(model.field(eps), x0, 0.0, L, rel_tol, abs_tol,
                            domain=model.field_domain)
    advance = model.omega(I0) * L
    theta1 = model.recover_angle(x1, point.theta0 + advance)
    dI = model.integrals(x1) - I0
    return np.concatenate([dI, [theta1 - point.theta0 - advance]])


def richardson(values, ratio=2.0, order=1):
    """Richardson extrapolation of a sequence computed at h, h/r, h/r^2, ...

    Assumes an error expansion in integer powers starting at ``order``.
    """
    table = [np.asarray(v, dtype=float) for v in values]
    p = order
    while len(table) > 1:
        f = ratio ** p
        table = [(f * table[i + 1] - table[i]) / (f - 1.0) for i in range(len(table) - 1)]
        p += 1
    return table[0]


def melnikov_flow_oracle(model, z0, res, degenerate=False, ladder=RICHARDSON_LADDER,
                         rel_tol=1e-13, abs_tol=1e-15):
    """Brute-force Melnikov vector from the displacement map.

    ``displacement / eps`` is Richardson-extrapolated to ``eps -> 0``
    along ``ladder``; in the degenerate normalization the phase entry is
    also divided by Omega.
    """
    point = z0 if isinstance(z0, ActionAnglePoint) else ActionAnglePoint.from_z(z0)
    vals = [displacement(model, point, e, res, rel_tol, abs_tol) / e for e in ladder]
    est = richardson(vals, ratio=ladder[0] / ladder[1])
    if degenerate:
        est[-1] /= model.omega(np.asarray(point.I))
    return est


def _return_map(model, eps, L, rel_tol, abs_tol):
    field_ = model.field(eps)
    return lambda x: odeint.final_state(field_, x, 0.0, L, rel_tol, abs_tol,
                                        domain=model.field_domain)


def refine_periodic_orbit(model, seed, eps, res, tol=1e-9, rel_tol=1e-10,
                          abs_tol=1e-12, max_iter=30, predicted_seed=None,
                          rank_rtol=1e-10):
    """Newton's method for a fixed point of the time-``nT`` map.

    Each step solves ``(M - Id) dx = -(phi(nT, x) - x)`` with the
    monodromy ``M`` from the variational equations.  When ``M - Id`` is
    numerically rank deficient (as at ``eps = 0``, where it is singular
    along the flow) the step is taken from the bordered system with the
    phase condition ``<f0(x), dx> = 0``.  Steps are damped until the
    residual decreases.

    Raises
    ------
    ConvergenceError
        When the residual is still above ``tol`` after ``max_iter`` steps.
    """
    x = np.array(seed, dtype=float)
    if predicted_seed is None:
        predicted_seed = x.copy()
    L = res.window(model.T)
    field_ = model.field(eps)
    jac = model.jacobian(eps)
    step_map = _return_map(model, eps, L, rel_tol, abs_tol)
    n = x.size
    residual = np.inf
    for it in range(max_iter + 1):
        xT, M = odeint.integrate_with_variational(field_, jac, x, 0.0, L, rel_tol,
                                                  abs_tol, domain=model.field_domain)
        F = xT - x
        residual = float(np.linalg.norm(F))
        log.debug("refine iteration %d: residual %.3e", it, residual)
        if residual <= tol:
            return PeriodicOrbitRecord(float(eps), x, L, residual, np.asarray(predicted_seed, float),
                                       iterations=it)
        if it == max_iter:
            break
        A = M - np.eye(n)
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] > rank_rtol * sv[0]:
            dx = np.linalg.solve(A, -F)
        else:
            f0 = model.f0(x)
            f0 = f0 / np.linalg.norm(f0)
            B = np.zeros((n + 1, n + 1))
            B[:n, :n] = A
            B[:n, n] = f0
            B[n, :n] = f0
            sol = np.linalg.lstsq(B, np.concatenate([-F, [0.0]]), rcond=None)[0]
            dx = sol[:n]
            if np.linalg.matrix_rank(B) < n:
                raise ConvergenceError("rank-deficient bordered Newton system")
        lam = 1.0
        for _ in range(12):
            trial = x + lam * dx
            try:
                r_trial = float(np.linalg.norm(step_map(trial) - trial))
            except IntegrationError:
                r_trial = np.inf
            if r_trial < residual:
                break
            lam *= 0.5
        else:
            raise ConvergenceError(f"Newton line search failed (residual {residual:.3e})")
        x = trial
    raise ConvergenceError(
        f"periodic orbit refinement did not converge in {max_iter} iterations "
        f"(residual {residual:.3e})")


def verify_orbit(model, record, cycles, rel_tol=1e-10, abs_tol=1e-12):
    """Return distances ``|x(j nT) - x(0)|`` for ``j = 1..cycles``.

    On integration failure the raised :class:`IntegrationError` carries
    the completed prefix in its ``completed`` attribute.
    """
    eps = record.epsilon
    L = record.period
    field_ = model.field(eps)
    x0 = np.asarray(record.x0_star, dtype=float)
    x = x0.copy()
    distances = []
    for j in range(1, int(cycles) + 1):
        try:
            x = odeint.final_state(field_, x, (j - 1) * L, j * L, rel_tol, abs_tol,
                                   domain=model.field_domain)
        except IntegrationError as err:
            err.completed = list(distances)
            raise
        distances.append(float(np.linalg.norm(x - x0)))
    return distances


def returns_csv(distances, target=None):
    """CSV with header ``cycle,return_distance``."""
    buf = io.StringIO()
    buf.write("cycle,return_distance\n")
    for j, d in enumerate(distances, start=1):
        buf.write(f"{j},{format_float(d)}\n")
    text = buf.getvalue()
    if target is None:
        return text
    with open(target, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return None
