"""Adaptive Dormand-Prince 5(4) integration with dense output.

Besides plain trajectories this module integrates the first variational
equation jointly with the flow (monodromy matrices), offers a
finite-difference flow Jacobian as a fallback, and solves the linear
inhomogeneous variational equation that yields the first-order
correction to a perturbed orbit.

Vector fields have the signature ``field(t, x) -> dx/dt`` with ``x`` a
1-D float array.  Time is always the absolute time of the
non-autonomous system.
"""

from dataclasses import dataclass, field as dc_field
import io

import numpy as np

from .errors import IntegrationError

__all__ = [
    "Trajectory",
    "DenseSolution",
    "integrate",
    "integrate_with_variational",
    "fd_monodromy",
    "inhomogeneous_variational",
    "format_float",
]

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = _A[6]
# Difference between the 5th- and 4th-order weights (7 stages, FSAL).
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
               22 / 525, -1 / 40])
# Continuous extension coefficients (4th-order dense output).
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
               -10690763975 / 1880347072, 701980252875 / 199316789632,
               -1453857185 / 822651844, 69997945 / 29380423])

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0


def format_float(value):
    """Format a float with 17 significant digits (round-trip exact)."""
    return format(float(value), ".17g")


class DenseSolution:
    """Piecewise quartic interpolant produced by :func:`integrate`.

    Calling the object with a scalar time returns an N-vector; with an
    array of times it returns an array of shape ``(len(t), N)``.
    """

    def __init__(self, t_start, h, rcont):
        self.t_start = np.asarray(t_start, dtype=float)
        self.h = np.asarray(h, dtype=float)
        self.rcont = np.asarray(rcont, dtype=float)  # (steps, 5, N)
        self.t_end = self.t_start + self.h

    @property
    def span(self):
        return float(self.t_start[0]), float(self.t_end[-1])

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.t_end, t, side="left")
        idx = np.clip(idx, 0, self.h.size - 1)
        s = ((t - self.t_start[idx]) / self.h[idx])[:, None]
        s1 = 1.0 - s
        r = self.rcont[idx]
        y = r[:, 0] + s * (r[:, 1] + s1 * (r[:, 2] + s * (r[:, 3] + s1 * r[:, 4])))
        return y[0] if scalar else y


@dataclass
class Trajectory:
    """Time-stamped samples of an integrated solution.

    Attributes
    ----------
    times : ndarray, shape (n,)
    states : ndarray, shape (n, N)
    integral_drift : ndarray or None
        Max deviation of each first integral from its initial value over
        the samples, present when a system model was attached.
    dense : DenseSolution or None
        Continuous interpolant over the whole interval, if requested.
    """

    times: np.ndarray
    states: np.ndarray
    integral_drift: np.ndarray = None
    dense: DenseSolution = dc_field(default=None, repr=False)

    @property
    def final_state(self):
        return self.states[-1]

    def to_csv(self, target=None):
        """Write ``t,x1,...,xN`` rows with 17 significant digits.

        ``target`` may be a path, a text stream or None (returns a string).
        """
        n = self.states.shape[1]
        buf = io.StringIO()
        buf.write(",".join(["t"] + [f"x{i + 1}" for i in range(n)]) + "\n")
        for t, x in zip(self.times, self.states):
            buf.write(",".join([format_float(t)] + [format_float(v) for v in x]))
            buf.write("\n")
        text = buf.getvalue()
        if target is None:
            return text
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return None


def _rms(v):
    return float(np.sqrt(np.mean(v * v)))


def _initial_step(field, t0, y0, f0, rel_tol, abs_tol, span):
    sc = abs_tol + rel_tol * np.abs(y0)
    d0 = _rms(y0 / sc)
    d1 = _rms(f0 / sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = np.asarray(field(t0 + h0, y1), dtype=float)
    d2 = _rms((f1 - f0) / sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, span)


def _steps(field, x0, t0, t1, rel_tol, abs_tol, domain, max_steps, first_step):
    """Generate accepted steps as ``(t, h, y_old, y_new, k_stages)``."""
    y = np.array(x0, dtype=float)
    t = float(t0)
    span = float(t1) - t
    if span <= 0.0:
        return
    k1 = np.asarray(field(t, y), dtype=float)
    if not np.all(np.isfinite(k1)):
        raise IntegrationError("vector field is not finite at the initial state", t, y)
    h = first_step if first_step else _initial_step(field, t, y, k1, rel_tol, abs_tol, span)
    k = np.empty((7, y.size))
    rejected = False
    for _ in range(max_steps):
        if t >= t1:
            return
        last = t + h >= t1 or (t1 - (t + h)) <= 1e-12 * max(1.0, abs(t1))
        if last:
            h = t1 - t
        if h <= 8.0 * np.finfo(float).eps * max(1.0, abs(t)):
            raise IntegrationError(
                f"step size underflow at t={t!r} (stiffness, singularity or domain exit)",
                t, y.copy())
        k[0] = k1
        for s in range(1, 7):
            k[s] = field(t + _C[s] * h, y + h * (_A[s] @ k[:s]))
        y_new = y + h * (_B @ k[:6])
        err_vec = h * (_E @ k)
        sc = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(err_vec / sc)
        ok = np.isfinite(err) and np.all(np.isfinite(y_new))
        if ok and domain is not None and not domain(y_new):
            ok = False
            err = np.inf
        if ok and err <= 1.0:
            t_new = t1 if last else t + h
            yield t, h, y, y_new, k
            t, y, k1 = t_new, y_new, k[6].copy()
            fac = _FAC_MAX if err == 0.0 else min(_FAC_MAX, max(_FAC_MIN, _SAFETY * err ** -0.2))
            if rejected:
                fac = min(fac, 1.0)
            h *= fac
            rejected = False
        else:
            fac = _FAC_MIN if not np.isfinite(err) else max(_FAC_MIN, _SAFETY * err ** -0.2)
            h *= min(fac, 0.9)
            rejected = True
    raise IntegrationError(f"maximum number of steps ({max_steps}) exceeded", t, y.copy())


def _rcont(h, y, y_new, k):
    ydiff = y_new - y
    bspl = h * k[0] - ydiff
    return np.stack([
        y,
        ydiff,
        bspl,
        ydiff - h * k[6] - bspl,
        h * (_D @ k),
    ])


def integrate(field, x0, t0, t1, rel_tol=1e-10, abs_tol=1e-12, t_eval=None,
              model=None, domain=None, dense=False, max_steps=2_000_000,
              first_step=None):
    """Integrate ``x' = field(t, x)`` from ``t0`` to ``t1``.

    Parameters
    ----------
    field : callable
        ``field(t, x)`` returning dx/dt.
    x0 : array_like
        Initial state.
    t0, t1 : float
        Integration interval, ``t1 >= t0``.
    rel_tol, abs_tol : float
        Per-step error tolerances, each in ``(0, 1e-2]``.
    t_eval : array_like, optional
        Sample times inside ``[t0, t1]``.  When omitted every accepted
        step is recorded.
    model : SystemModel, optional
        Enables integral-drift diagnostics and the model's domain guard.
    domain : callable, optional
        Predicate on states; steps landing outside are rejected.
    dense : bool
        Attach a :class:`DenseSolution` to the result.

    Returns
    -------
    Trajectory

    Raises
    ------
    IntegrationError
        On step-size underflow, non-finite values or domain exit.
    """
    for tol in (rel_tol, abs_tol):
        if not (0.0 < tol <= 1e-2):
            raise ValueError(f"tolerances must lie in (0, 1e-2], got {tol!r}")
    t0 = float(t0)
    t1 = float(t1)
    if t1 < t0:
        raise ValueError("integration requires t1 >= t0")
    x0 = np.array(x0, dtype=float)
    if domain is None and model is not None:
        domain = model.field_domain

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval.size and (np.any(np.diff(t_eval) <= 0) or t_eval[0] < t0
                            or t_eval[-1] > t1):
            raise ValueError("t_eval must be strictly increasing inside [t0, t1]")

    times = [t0] if t_eval is None else []
    states = [x0.copy()] if t_eval is None else []
    pending = 0
    if t_eval is not None:
        while pending < t_eval.size and t_eval[pending] <= t0:
            times.append(float(t_eval[pending]))
            states.append(x0.copy())
            pending += 1

    dense_t, dense_h, dense_r = [], [], []
    for t, h, y, y_new, k in _steps(field, x0, t0, t1, rel_tol, abs_tol, domain,
                                    max_steps, first_step):
        t_new = t + h
        need_interp = t_eval is not None and pending < t_eval.size and t_eval[pending] <= t_new
        if dense or need_interp:
            rc = _rcont(h, y, y_new, k)
            if dense:
                dense_t.append(t)
                dense_h.append(h)
                dense_r.append(rc)
        if t_eval is None:
            times.append(t_new)
            states.append(y_new)
        else:
            while pending < t_eval.size and t_eval[pending] <= t_new:
                te = float(t_eval[pending])
                if te == t_new:
                    states.append(y_new.copy())
                else:
                    s = (te - t) / h
                    s1 = 1.0 - s
                    states.append(rc[0] + s * (rc[1] + s1 * (rc[2] + s * (rc[3] + s1 * rc[4]))))
                times.append(te)
                pending += 1

    traj = Trajectory(np.array(times), np.array(states).reshape(len(times), x0.size))
    if dense:
        if not dense_t:
            dense_t, dense_h = [t0], [1.0]
            dense_r = [np.stack([x0, np.zeros_like(x0), np.zeros_like(x0),
                                 np.zeros_like(x0), np.zeros_like(x0)])]
        traj.dense = DenseSolution(dense_t, dense_h, dense_r)
    if model is not None and traj.states.size:
        ref = np.asarray(model.integrals(x0))
        vals = np.array([model.integrals(x) for x in traj.states])
        traj.integral_drift = np.max(np.abs(vals - ref), axis=0)
    return traj


def final_state(field, x0, t0, t1, rel_tol=1e-10, abs_tol=1e-12, domain=None):
    """Return only the state at ``t1`` (no sample storage)."""
    y = np.array(x0, dtype=float)
    for _, _, _, y_new, _ in _steps(field, y, float(t0), float(t1), rel_tol, abs_tol,
                                    domain, 2_000_000, None):
        y = y_new
    return y


def integrate_with_variational(field, jacobian, x0, t0, t1, rel_tol=1e-10,
                               abs_tol=1e-12, domain=None):
    """Integrate the flow together with its first variational equation.

    Returns
    -------
    x1 : ndarray, shape (N,)
        State at ``t1``.
    M : ndarray, shape (N, N)
        Flow derivative ``d x(t1) / d x0`` (the identity when ``t1 == t0``).
    """
    x0 = np.array(x0, dtype=float)
    n = x0.size

    def augmented(t, z):
        x = z[:n]
        phi = z[n:].reshape(n, n)
        return np.concatenate([field(t, x), (jacobian(t, x) @ phi).ravel()])

    z0 = np.concatenate([x0, np.eye(n).ravel()])
    aug_domain = None if domain is None else (lambda z: domain(z[:n]))
    z1 = final_state(augmented, z0, t0, t1, rel_tol, abs_tol, aug_domain)
    return z1[:n], z1[n:].reshape(n, n)


def fd_monodromy(field, x0, t0, t1, rel_tol=1e-10, abs_tol=1e-12, step=1e-6,
                 domain=None):
    """Flow derivative by central differences, step ``step * max(1, |x0_j|)``."""
    x0 = np.array(x0, dtype=float)
    n = x0.size
    M = np.empty((n, n))
    for j in range(n):
        h = step * max(1.0, abs(x0[j]))
        e = np.zeros(n)
        e[j] = h
        plus = final_state(field, x0 + e, t0, t1, rel_tol, abs_tol, domain)
        minus = final_state(field, x0 - e, t0, t1, rel_tol, abs_tol, domain)
        M[:, j] = (plus - minus) / (2.0 * h)
    return M


def inhomogeneous_variational(jacobian_along_orbit, forcing, t0, t1, n=None,
                              rel_tol=1e-10, abs_tol=1e-12):
    """Solve ``x1' = J(t) x1 + g(t)`` with ``x1(t0) = 0``.

    Parameters
    ----------
    jacobian_along_orbit : callable
        ``t -> (N, N)`` matrix, the field Jacobian along the unperturbed orbit.
    forcing : callable
        ``t -> (N,)`` inhomogeneity.
    n : int, optional
        Dimension; inferred from ``forcing(t0)`` when omitted.

    Returns
    -------
    x1_final : ndarray
        ``x1(t1)``.
    dense : DenseSolution
        Continuous samples of ``x1(t)`` on ``[t0, t1]``.
    """
    if n is None:
        n = np.asarray(forcing(t0)).size

    def rhs(t, x):
        return jacobian_along_orbit(t) @ x + forcing(t)

    traj = integrate(rhs, np.zeros(n), t0, t1, rel_tol, abs_tol, dense=True)
    return traj.final_state.copy(), traj.dense
