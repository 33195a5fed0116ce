"""Perturbed completely integrable systems.

A :class:`SystemModel` bundles everything the Melnikov, orbit and
Floquet analyses need about a system ``x' = f0(x) + eps * f1(x, t, eps)``
on a domain foliated by periodic orbits: the fields and their
derivatives, the N-1 first integrals, a parametrization
``G(I, theta)`` of the orbits by integral levels and a phase that
advances at unit rate in time units of the perturbation period T, and
the period map P(I).

Model methods are vectorized over the trailing axis: a state argument
may have shape ``(N,)`` or ``(N, n)`` and time arguments may be scalars
or arrays of length n.  ``d2f0`` is the exception and takes a single
state.
"""

from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .elliptic import complete_K, jacobi_sn_cn_dn, check_modulus
from .errors import ConvergenceError, DomainError

__all__ = [
    "ActionAnglePoint",
    "ResonanceSpec",
    "SystemModel",
    "LinearOscillator",
    "GeneralizedEuler",
    "CoupledOscillator",
    "euler_parametrization",
    "euler_period",
    "oscillator_parametrization",
    "resonance_check",
    "build_system",
    "SYSTEMS",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ActionAnglePoint:
    """A point ``(I, theta0)`` on the cross-section ``t = 0``."""

    I: tuple
    theta0: float

    def __post_init__(self):
        object.__setattr__(self, "I", tuple(float(v) for v in np.atleast_1d(self.I)))
        object.__setattr__(self, "theta0", float(self.theta0))

    def as_z(self):
        """Vector ``(theta0, I_1, ..., I_{N-1})`` (Jacobian column order)."""
        return np.array((self.theta0,) + self.I)

    @classmethod
    def from_z(cls, z):
        z = np.asarray(z, dtype=float)
        return cls(tuple(z[1:]), float(z[0]))

    def wrapped(self, period):
        """Same point with ``theta0`` reduced to ``[0, period)``."""
        th = self.theta0 % period
        if th >= period:
            th = 0.0
        return ActionAnglePoint(self.I, th)

    def to_dict(self):
        return {"I": list(self.I), "theta0": self.theta0}


@dataclass(frozen=True)
class ResonanceSpec:
    """Subharmonic resonance ``m * P(I) = n * T`` (stored gcd-reduced)."""

    m: int
    n: int

    def __post_init__(self):
        m, n = int(self.m), int(self.n)
        if m <= 0 or n <= 0 or m != self.m or n != self.n:
            raise ValueError(f"resonance orders must be positive integers, got ({self.m}, {self.n})")
        g = gcd(m, n)
        object.__setattr__(self, "m", m // g)
        object.__setattr__(self, "n", n // g)

    def window(self, T):
        """Length ``n * T`` of the resonant return time."""
        return self.n * T

    def to_dict(self):
        return {"m": self.m, "n": self.n}


def _five_point(f, e, h):
    """Fourth-order central difference of ``f`` along the offset ``e`` (norm ``h``)."""
    return (8.0 * (f(e) - f(-e)) - (f(2.0 * e) - f(-2.0 * e))) / (12.0 * h)


def _zeros(x):
    return np.zeros_like(np.asarray(x[0], dtype=float))


def _ones(x):
    return np.ones_like(np.asarray(x[0], dtype=float))


class SystemModel:
    """Base class for perturbed integrable systems.

    Subclasses provide ``N``, ``T`` and the methods ``f0``, ``f1``,
    ``df0``, ``d2f0``, ``df1``, ``integrals``, ``integral_gradients``,
    ``parametrization``, ``period``, ``in_domain`` and ``level_in_domain``.
    """

    name = "abstract"
    N = 0
    T = TWO_PI
    #: Integral level used to seed searches when nothing better is known.
    reference_level = None
    #: Human readable description of the perturbation variant.
    perturbation_doc = ""

    def parameters(self):
        """Constructor parameters, as a JSON-friendly dict."""
        return {}

    # -- fields ---------------------------------------------------------
    def f0(self, x):
        raise NotImplementedError

    def f1(self, x, t, eps=0.0):
        raise NotImplementedError

    def df0(self, x):
        raise NotImplementedError

    def d2f0(self, x):
        raise NotImplementedError

    def df1(self, x, t):
        raise NotImplementedError

    # -- integrals and orbits -------------------------------------------
    def integrals(self, x):
        raise NotImplementedError

    def integral_gradients(self, x):
        raise NotImplementedError

    def parametrization(self, I, theta):
        raise NotImplementedError

    def period(self, I):
        raise NotImplementedError

    def in_domain(self, x):
        raise NotImplementedError

    def level_in_domain(self, I):
        raise NotImplementedError

    def field_domain(self, x):
        """Predicate for states where the perturbed field is defined.

        Used as the integrator guard; it may be larger than the region
        covered by the parametrization (``in_domain``).
        """
        return True

    @property
    def has_perturbation(self):
        return True

    def parametrization_dI(self, I, theta, rel_step=1e-3):
        """Partial derivatives ``dG/dI_j`` by five-point central differences.

        The wide fourth-order stencil keeps round-off jitter near 1e-13 so
        quadratures of expressions containing ``G_I`` can converge.
        Returns shape ``(N, N-1)`` or ``(N, N-1, n)`` for array ``theta``.
        """
        I = np.asarray(I, dtype=float)
        cols = []
        for j in range(I.size):
            h = rel_step * max(1.0, abs(I[j]))
            e = np.zeros_like(I)
            e[j] = h
            cols.append(_five_point(lambda dI: self.parametrization(I + dI, theta), e, h))
        return np.stack(cols, axis=1)

    def omega(self, I):
        """Frequency ratio ``Omega(I) = T / P(I)``."""
        p = self.period(I)
        if not np.isfinite(p) or p <= 0.0:
            raise DomainError(f"period is not finite and positive at I={I!r}")
        return self.T / p

    def omega_gradient(self, I, rel_step=1e-3):
        """Gradient of Omega with respect to the integral levels."""
        I = np.asarray(I, dtype=float)
        g = np.empty(I.size)
        for j in range(I.size):
            h = rel_step * max(1.0, abs(I[j]))
            e = np.zeros_like(I)
            e[j] = h
            g[j] = _five_point(lambda dI: self.omega(I + dI), e, h)
        return g

    def field(self, eps):
        """Return ``(t, x) -> f0(x) + eps * f1(x, t, eps)``."""
        eps = float(eps)
        if eps == 0.0:
            return lambda t, x: self.f0(x)
        return lambda t, x: self.f0(x) + eps * self.f1(x, t, eps)

    def jacobian(self, eps):
        """Return ``(t, x) -> df0(x) + eps * df1(x, t)``."""
        eps = float(eps)
        if eps == 0.0:
            return lambda t, x: self.df0(x)
        return lambda t, x: self.df0(x) + eps * self.df1(x, t)

    def state(self, point):
        """``G(I, theta0)`` for an :class:`ActionAnglePoint`."""
        return self.parametrization(point.I, point.theta0)

    def unperturbed_orbit(self, I, theta0, t):
        """Closed-form unperturbed solution ``G(I, theta0 + Omega(I) t)``."""
        return self.parametrization(I, theta0 + self.omega(I) * np.asarray(t, dtype=float))

    def check_level(self, I):
        I = np.asarray(I, dtype=float)
        if I.size != self.N - 1:
            raise DomainError(f"{self.name} expects {self.N - 1} integral levels, got {I.size}")
        if not self.level_in_domain(I):
            raise DomainError(f"integral level {tuple(float(v) for v in I)} lies outside the domain of {self.name}")
        return I

    def recover_angle(self, x, guess=0.0, tol=1e-10, max_distance=None):
        """Phase ``theta`` with ``G(I(x), theta) = x``, nearest to ``guess``.

        The stationarity condition of ``|G(I, theta) - x|^2`` is solved by
        Brent's method inside a bracket located by sampling one period
        centred on ``guess``.

        Raises
        ------
        ConvergenceError
            If the best match is farther than ``max_distance`` from ``x``
            (the state is not on the level set, e.g. because it left the
            domain).
        """
        x = np.asarray(x, dtype=float)
        I = self.integrals(x)
        if not self.level_in_domain(I):
            raise ConvergenceError(f"state {x} maps to an integral level outside the domain")
        T = self.T
        samples = 64
        grid = guess + T * (np.arange(samples) / samples - 0.5)
        pts = self.parametrization(I, grid)
        d2 = np.sum((pts - x[:, None]) ** 2, axis=0)
        j = int(np.argmin(d2))
        width = T / samples
        lam = self.period(I) / T

        def slope(th):
            g = self.parametrization(I, th)
            return float(np.dot(lam * self.f0(g), g - x))

        lo, hi = grid[j] - width, grid[j] + width
        s_lo, s_hi = slope(lo), slope(hi)
        if s_lo < 0.0 < s_hi:
            theta = brentq(slope, lo, hi, xtol=tol * max(1.0, abs(grid[j])), rtol=4 * np.finfo(float).eps)
        else:
            res = minimize_scalar(lambda th: float(np.sum((self.parametrization(I, th) - x) ** 2)),
                                  bounds=(lo, hi), method="bounded",
                                  options={"xatol": tol})
            theta = float(res.x)
        dist = float(np.linalg.norm(self.parametrization(I, theta) - x))
        if max_distance is None:
            max_distance = 1e-7 * max(1.0, float(np.linalg.norm(x)))
        if dist > max_distance:
            raise ConvergenceError(
                f"angle recovery failed: state is {dist:.3e} away from its level set")
        return float(theta)

    # -- perturbation overrides -----------------------------------------
    def with_perturbation(self, f1, df1=None, name=None):
        """Copy of this model whose perturbation is replaced by ``f1``.

        ``f1(x, t, eps)`` and ``df1(x, t)`` follow the model conventions;
        when ``df1`` is omitted it is approximated by central differences.
        """
        return _PerturbationOverride(self, f1, df1, name)

    def unperturbed(self):
        """Copy of this model with ``f1`` identically zero."""
        n = self.N

        def zero(x, t, eps=0.0):
            return np.zeros_like(np.asarray(x, dtype=float))

        def dzero(x, t):
            x = np.asarray(x, dtype=float)
            return np.zeros((n, n) + x.shape[1:])

        model = _PerturbationOverride(self, zero, dzero, self.name)
        model._zero = True
        return model

    def describe(self):
        return {"name": self.name, "N": self.N, "T": self.T,
                "parameters": self.parameters(),
                "perturbation": self.perturbation_doc}


class _PerturbationOverride(SystemModel):
    """Delegates everything except the perturbation to a base model."""

    _zero = False

    def __init__(self, base, f1, df1, name):
        self._base = base
        self._f1 = f1
        self._df1 = df1
        self.name = name or f"{base.name}+custom"
        self.N = base.N
        self.T = base.T
        self.reference_level = base.reference_level
        self.perturbation_doc = "custom perturbation"

    def __getattr__(self, attr):
        return getattr(self._base, attr)

    @property
    def has_perturbation(self):
        return not self._zero

    def parameters(self):
        return self._base.parameters()

    def f0(self, x):
        return self._base.f0(x)

    def df0(self, x):
        return self._base.df0(x)

    def d2f0(self, x):
        return self._base.d2f0(x)

    def integrals(self, x):
        return self._base.integrals(x)

    def integral_gradients(self, x):
        return self._base.integral_gradients(x)

    def parametrization(self, I, theta):
        return self._base.parametrization(I, theta)

    def parametrization_dI(self, I, theta, rel_step=1e-3):
        return self._base.parametrization_dI(I, theta, rel_step)

    def period(self, I):
        return self._base.period(I)

    def in_domain(self, x):
        return self._base.in_domain(x)

    def level_in_domain(self, I):
        return self._base.level_in_domain(I)

    def field_domain(self, x):
        return self._base.field_domain(x)

    def f1(self, x, t, eps=0.0):
        return self._f1(x, t, eps)

    def df1(self, x, t):
        if self._df1 is not None:
            return self._df1(x, t)
        x = np.asarray(x, dtype=float)
        cols = []
        for j in range(self.N):
            h = 1e-6 * max(1.0, abs(float(x[j])))
            e = np.zeros(self.N)
            e[j] = h
            cols.append((self._f1(x + e, t, 0.0) - self._f1(x - e, t, 0.0)) / (2.0 * h))
        return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# Linear oscillator baseline
# ---------------------------------------------------------------------------

class LinearOscillator(SystemModel):
    """Planar isochronous oscillator ``x' = w y, y' = -w x``.

    The optional perturbation ``f1 = (0, F cos(2 pi t / T) + mu (1 - x^2 - y^2) y)``
    is a forced self-excited term; with ``F = mu = 0`` (the default) the
    system is unperturbed.  Its single integral is ``I = x^2 + y^2``.
    """

    name = "linear_oscillator"
    N = 2

    def __init__(self, omega=1.0, period=TWO_PI, forcing=0.0, damping=0.0):
        self.w = float(omega)
        if self.w <= 0.0:
            raise DomainError("oscillator frequency must be positive")
        self.T = float(period)
        self.forcing = float(forcing)
        self.damping = float(damping)
        self.reference_level = (1.0,)
        self.perturbation_doc = "(0, forcing*cos(2*pi*t/T) + damping*(1 - x^2 - y^2)*y)"

    def parameters(self):
        return {"omega": self.w, "period": self.T, "forcing": self.forcing,
                "damping": self.damping}

    @property
    def has_perturbation(self):
        return self.forcing != 0.0 or self.damping != 0.0

    def f0(self, x):
        return self.w * np.array([x[1], -x[0]])

    def df0(self, x):
        return np.array([[0.0, self.w], [-self.w, 0.0]])

    def d2f0(self, x):
        return np.zeros((2, 2, 2))

    def f1(self, x, t, eps=0.0):
        x = np.asarray(x, dtype=float)
        r2 = x[0] ** 2 + x[1] ** 2
        drive = self.forcing * np.cos(TWO_PI * np.asarray(t) / self.T)
        return np.array([_zeros(x), drive + self.damping * (1.0 - r2) * x[1]])

    def df1(self, x, t):
        x = np.asarray(x, dtype=float)
        mu = self.damping
        z = _zeros(x)
        return np.array([[z, z],
                         [-2.0 * mu * x[0] * x[1], mu * (1.0 - x[0] ** 2 - 3.0 * x[1] ** 2)]])

    def integrals(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([x[0] ** 2 + x[1] ** 2])

    def integral_gradients(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([[2.0 * x[0], 2.0 * x[1]]])

    def parametrization(self, I, theta):
        I = np.asarray(I, dtype=float)
        if I.size != 1 or I[0] <= 0.0:
            raise DomainError(f"linear oscillator level must be positive, got {I!r}")
        phi = TWO_PI * np.asarray(theta, dtype=float) / self.T
        r = np.sqrt(I[0])
        return np.array([r * np.cos(phi), -r * np.sin(phi)])

    def parametrization_dI(self, I, theta, rel_step=None):
        g = self.parametrization(I, theta)
        return (g / (2.0 * float(np.asarray(I).ravel()[0])))[:, None]

    def period(self, I):
        return TWO_PI / self.w

    def in_domain(self, x):
        return bool(x[0] ** 2 + x[1] ** 2 > 0.0)

    def level_in_domain(self, I):
        I = np.atleast_1d(np.asarray(I, dtype=float))
        return bool(I.size == 1 and np.isfinite(I[0]) and I[0] > 0.0)


# ---------------------------------------------------------------------------
# Generalized Euler system
# ---------------------------------------------------------------------------

def _euler_constants(a):
    a1, a2, a3 = (float(v) for v in a)
    if not (a1 > 0.0 and a2 < 0.0 and a3 > 0.0):
        raise DomainError("only the bounded regime a1 > 0, a2 < 0, a3 > 0 is supported")
    return a1, a2, a3


class GeneralizedEuler(SystemModel):
    """Perturbed generalized Euler system in its bounded periodic regime.

    Unperturbed field ``(a1 x2 x3, a2 x1 x3, a3 x1 x2)`` with
    ``a1, a3 > 0 > a2``.  The orbits with ``x3 > 0`` oscillating around
    the positive x3 axis are parametrized by

    * ``I1 = sqrt(x3^2 + (a3/|a2|) x2^2)``, the amplitude of x3,
    * ``I2 = sqrt(x1^2 + (a1/|a2|) x2^2)``, the amplitude of x1,

    with solution ``x = (I2 cn(mu s), -I2 sqrt(|a2|/a1) sn(mu s), I1 dn(mu s))``,
    modulus ``k = sqrt(a3/a1) I2/I1`` and ``mu = sqrt(a1 |a2|) I1``; the
    period is ``P(I) = 4 K(k) / mu``.

    The perturbation is

    * ``p1 = x1 + alpha1 cn(w1 t) + beta1 sn(w2 t)``
    * ``p2 = x2 + alpha2 cn(w1 t) + beta2 sn(w2 t)``
    * ``p3 = x3 + amp nd(w3 t) + b (x1/x3) cn(w2 t) + c (x2/x3) sn(w2 t)``

    with elliptic functions of modulus ``k_pert``.

    ``period`` is the window T used by the analysis.  By default it is
    ``4 K(k_pert) / 3``, the period of the unperturbed orbit through the
    reference level ``(3/sqrt 2, 3/(2 sqrt 2))`` (which is therefore a
    (1, 1) resonance).  The forcing terms themselves only repeat after
    :attr:`forcing_period` (``4 K(k_pert)`` for integer frequencies), so
    with the default window f1 is not T-periodic.
    """

    name = "generalized_euler"
    N = 3

    def __init__(self, a=(1.0, -2.0, 1.0), alpha1=-3.0 / (2.0 * np.sqrt(2.0)),
                 beta1=2.89972, alpha2=0.0, beta2=1.5, amp=-3.0 / np.sqrt(2.0),
                 b=0.0, c=-0.75, omegas=(1.0, 2.0, 3.0), k_pert=0.5, period=None,
                 x3_min=1e-6):
        self.a = _euler_constants(a)
        self.alpha1 = float(alpha1)
        self.beta1 = float(beta1)
        self.alpha2 = float(alpha2)
        self.beta2 = float(beta2)
        self.amp = float(amp)
        self.b = float(b)
        self.c = float(c)
        self.omegas = tuple(float(w) for w in omegas)
        if len(self.omegas) != 3:
            raise ValueError("three forcing frequencies are required")
        self.k_pert = check_modulus(k_pert)
        self.x3_min = float(x3_min)
        quarter = complete_K(self.k_pert)
        self.T = float(period) if period is not None else 4.0 * quarter / 3.0
        if not self.T > 0.0:
            raise DomainError("period must be positive")
        if all(float(w).is_integer() and w != 0 for w in self.omegas):
            self.forcing_period = 4.0 * quarter
        else:
            self.forcing_period = None
        a1, a2, a3 = self.a
        self._r1 = a3 / abs(a2)
        self._r2 = a1 / abs(a2)
        self._x2scale = np.sqrt(abs(a2) / a1)
        self._mu_scale = np.sqrt(a1 * abs(a2))
        self._kscale = np.sqrt(a3 / a1)
        self.reference_level = (3.0 / np.sqrt(2.0), 3.0 / (2.0 * np.sqrt(2.0)))
        self.perturbation_doc = ("p1 = x1 + alpha1 cn(w1 t) + beta1 sn(w2 t); "
                                 "p2 = x2 + alpha2 cn(w1 t) + beta2 sn(w2 t); "
                                 "p3 = x3 + amp nd(w3 t) + b x1/x3 cn(w2 t) + c x2/x3 sn(w2 t)")

    def parameters(self):
        return {"a": list(self.a), "alpha1": self.alpha1, "beta1": self.beta1,
                "alpha2": self.alpha2, "beta2": self.beta2, "amp": self.amp,
                "b": self.b, "c": self.c, "omegas": list(self.omegas),
                "k_pert": self.k_pert, "period": self.T, "x3_min": self.x3_min}

    def f0(self, x):
        a1, a2, a3 = self.a
        return np.array([a1 * x[1] * x[2], a2 * x[0] * x[2], a3 * x[0] * x[1]])

    def df0(self, x):
        a1, a2, a3 = self.a
        z = _zeros(x)
        return np.array([[z, a1 * x[2], a1 * x[1]],
                         [a2 * x[2], z, a2 * x[0]],
                         [a3 * x[1], a3 * x[0], z]])

    def d2f0(self, x):
        a1, a2, a3 = self.a
        h = np.zeros((3, 3, 3))
        h[0, 1, 2] = h[0, 2, 1] = a1
        h[1, 0, 2] = h[1, 2, 0] = a2
        h[2, 0, 1] = h[2, 1, 0] = a3
        return h

    def _forcing(self, t):
        t = np.asarray(t, dtype=float)
        w1, w2, w3 = self.omegas
        args = np.stack([w1 * t, w2 * t, w3 * t])
        sn, cn, dn = jacobi_sn_cn_dn(args, self.k_pert)
        return cn[0], sn[1], cn[1], 1.0 / dn[2]

    def f1(self, x, t, eps=0.0):
        x = np.asarray(x, dtype=float)
        cn1, sn2, cn2, nd3 = self._forcing(t)
        return np.array([
            x[0] + self.alpha1 * cn1 + self.beta1 * sn2,
            x[1] + self.alpha2 * cn1 + self.beta2 * sn2,
            x[2] + self.amp * nd3 + (self.b * x[0] * cn2 + self.c * x[1] * sn2) / x[2],
        ])

    def df1(self, x, t):
        x = np.asarray(x, dtype=float)
        _, sn2, cn2, _ = self._forcing(t)
        z = _zeros(x)
        one = _ones(x)
        inv = 1.0 / x[2]
        return np.array([
            [one, z, z],
            [z, one, z],
            [self.b * cn2 * inv * one, self.c * sn2 * inv * one,
             1.0 - (self.b * x[0] * cn2 + self.c * x[1] * sn2) * inv * inv],
        ])

    def integrals(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([np.sqrt(x[2] ** 2 + self._r1 * x[1] ** 2),
                         np.sqrt(x[0] ** 2 + self._r2 * x[1] ** 2)])

    def integral_gradients(self, x):
        x = np.asarray(x, dtype=float)
        I1, I2 = self.integrals(x)
        z = _zeros(x)
        return np.array([[z, self._r1 * x[1] / I1, x[2] / I1],
                         [x[0] / I2, self._r2 * x[1] / I2, z]])

    def modulus(self, I):
        return self._kscale * I[1] / I[0]

    def level_in_domain(self, I):
        I = np.atleast_1d(np.asarray(I, dtype=float))
        if I.size != 2 or not np.all(np.isfinite(I)):
            return False
        return bool(I[0] > 0.0 and I[1] > 0.0 and self.modulus(I) < 1.0
                    and I[0] * np.sqrt(1.0 - self.modulus(I) ** 2) > self.x3_min)

    def field_domain(self, x):
        return bool(x[2] > self.x3_min)

    def in_domain(self, x):
        a1, a2, a3 = self.a
        h2 = a3 * x[0] ** 2 - a1 * x[2] ** 2
        return bool(x[2] > self.x3_min and a2 * h2 > 0.0)

    def period(self, I):
        I = self.check_level(I)
        return 4.0 * complete_K(self.modulus(I)) / (self._mu_scale * I[0])

    def parametrization(self, I, theta):
        I = self.check_level(I)
        k = self.modulus(I)
        mu = self._mu_scale * I[0]
        lam = self.period(I) / self.T
        sn, cn, dn = jacobi_sn_cn_dn(mu * lam * np.asarray(theta, dtype=float), k)
        return np.array([I[1] * cn, -I[1] * self._x2scale * sn, I[0] * dn])


# ---------------------------------------------------------------------------
# Coupled oscillators (isochronous, degenerate case)
# ---------------------------------------------------------------------------

_D_FACTORS = ("I2", "I1")
_FORCING_SLOTS = ("x1", "y1")


class CoupledOscillator(SystemModel):
    """Two identical harmonic oscillators with a coupling perturbation.

    State ``(x1, y1, x2, y2)``, unperturbed field
    ``w (y1, -x1, y2, -x2)`` and integrals ``I1 = x1^2 + y1^2``,
    ``I2 = x2^2 + y2^2``, ``I3 = x1 x2 + y1 y2``.  The perturbation is
    ``w * (F_x1, F_y1, c x1 (1 - I2), d x1 (1 - I_d))`` where

    * the harmonic drive ``a cos t`` enters slot ``forcing_slot``
      (``"x1"`` by default, or ``"y1"``),
    * ``F_y1`` also carries ``b x1 I2 cos t + cubic x1 I2``,
    * ``I_d`` is ``I2`` (default) or ``I1`` according to ``d_factor``.

    The parametrization follows the direction of the flow::

        G(I, theta) = (sqrt(I1) cos p, -sqrt(I1) sin p,
                       (I3 cos p + R sin p)/sqrt(I1), (-I3 sin p + R cos p)/sqrt(I1))

    with ``p = 2 pi theta / T`` and ``R = sqrt(I1 I2 - I3^2)``.  Its image
    is the half of phase space where ``x1 y2 - y1 x2 > 0``.
    """

    name = "coupled_oscillator"
    N = 4

    def __init__(self, omega=1.0, a=601.0 / (6.0 * np.sqrt(5.0)), b=0.0,
                 c=-1.0 / 1080.0, d=1.0 / 2280.0, forcing_slot="x1", cubic=0.0,
                 d_factor="I2", period=TWO_PI):
        self.w = float(omega)
        if self.w <= 0.0:
            raise DomainError("oscillator frequency must be positive")
        self.a = float(a)
        self.b = float(b)
        self.c = float(c)
        self.d = float(d)
        self.cubic = float(cubic)
        if forcing_slot not in _FORCING_SLOTS:
            raise ValueError(f"forcing_slot must be one of {_FORCING_SLOTS}")
        if d_factor not in _D_FACTORS:
            raise ValueError(f"d_factor must be one of {_D_FACTORS}")
        self.forcing_slot = forcing_slot
        self.d_factor = d_factor
        self.T = float(period)
        self.reference_level = (5.0, 2.0, 1.0)
        slot_x1 = "a cos t" if forcing_slot == "x1" else "0"
        slot_y1 = ("a cos t + " if forcing_slot == "y1" else "") + "b x1 I2 cos t + cubic x1 I2"
        self.perturbation_doc = (f"w*({slot_x1}, {slot_y1}, c x1 (1 - I2), "
                                 f"d x1 (1 - {d_factor}))")

    def parameters(self):
        return {"omega": self.w, "a": self.a, "b": self.b, "c": self.c, "d": self.d,
                "forcing_slot": self.forcing_slot, "cubic": self.cubic,
                "d_factor": self.d_factor, "period": self.T}

    def f0(self, x):
        return self.w * np.array([x[1], -x[0], x[3], -x[2]])

    def df0(self, x):
        w = self.w
        return np.array([[0.0, w, 0.0, 0.0],
                         [-w, 0.0, 0.0, 0.0],
                         [0.0, 0.0, 0.0, w],
                         [0.0, 0.0, -w, 0.0]])

    def d2f0(self, x):
        return np.zeros((4, 4, 4))

    def f1(self, x, t, eps=0.0):
        x = np.asarray(x, dtype=float)
        cos_t = np.cos(np.asarray(t, dtype=float)) * _ones(x)
        I1 = x[0] ** 2 + x[1] ** 2
        I2 = x[2] ** 2 + x[3] ** 2
        drive = self.a * cos_t
        fx1 = drive if self.forcing_slot == "x1" else _zeros(x)
        fy1 = (drive if self.forcing_slot == "y1" else _zeros(x)) \
            + (self.b * cos_t + self.cubic) * x[0] * I2
        Id = I2 if self.d_factor == "I2" else I1
        return self.w * np.array([fx1, fy1, self.c * x[0] * (1.0 - I2),
                                  self.d * x[0] * (1.0 - Id)])

    def df1(self, x, t):
        x = np.asarray(x, dtype=float)
        cos_t = np.cos(np.asarray(t, dtype=float)) * _ones(x)
        z = _zeros(x)
        I2 = x[2] ** 2 + x[3] ** 2
        g = self.b * cos_t + self.cubic
        row_y1 = [g * I2, z, 2.0 * g * x[0] * x[2], 2.0 * g * x[0] * x[3]]
        c, d = self.c, self.d
        row_x2 = [c * (1.0 - I2), z, -2.0 * c * x[0] * x[2], -2.0 * c * x[0] * x[3]]
        if self.d_factor == "I2":
            row_y2 = [d * (1.0 - I2), z, -2.0 * d * x[0] * x[2], -2.0 * d * x[0] * x[3]]
        else:
            I1 = x[0] ** 2 + x[1] ** 2
            row_y2 = [d * (1.0 - I1) - 2.0 * d * x[0] ** 2, -2.0 * d * x[0] * x[1], z, z]
        return self.w * np.array([[z, z, z, z], row_y1, row_x2, row_y2])

    def integrals(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([x[0] ** 2 + x[1] ** 2,
                         x[2] ** 2 + x[3] ** 2,
                         x[0] * x[2] + x[1] * x[3]])

    def integral_gradients(self, x):
        x = np.asarray(x, dtype=float)
        z = _zeros(x)
        return np.array([[2.0 * x[0], 2.0 * x[1], z, z],
                         [z, z, 2.0 * x[2], 2.0 * x[3]],
                         [x[2], x[3], x[0], x[1]]])

    def level_in_domain(self, I):
        I = np.atleast_1d(np.asarray(I, dtype=float))
        if I.size != 3 or not np.all(np.isfinite(I)):
            return False
        return bool(I[0] > 0.0 and I[1] > 0.0 and I[0] * I[1] - I[2] ** 2 > 0.0)

    def in_domain(self, x):
        return bool(x[0] ** 2 + x[1] ** 2 > 0.0 and x[0] * x[3] - x[1] * x[2] > 0.0)

    def period(self, I):
        return TWO_PI / self.w

    def parametrization(self, I, theta):
        I = self.check_level(I)
        p = TWO_PI * np.asarray(theta, dtype=float) / self.T
        s1 = np.sqrt(I[0])
        R = np.sqrt(I[0] * I[1] - I[2] ** 2)
        cp, sp = np.cos(p), np.sin(p)
        return np.array([s1 * cp, -s1 * sp,
                         (I[2] * cp + R * sp) / s1,
                         (-I[2] * sp + R * cp) / s1])

    def parametrization_dI(self, I, theta, rel_step=None):
        I = self.check_level(I)
        p = TWO_PI * np.asarray(theta, dtype=float) / self.T
        cp, sp = np.cos(p), np.sin(p)
        I1, I2, I3 = I
        s1 = np.sqrt(I1)
        R = np.sqrt(I1 * I2 - I3 ** 2)
        z = np.zeros_like(cp)
        # d/dI1
        dR1 = I2 / (2.0 * R)
        col1 = np.array([cp / (2.0 * s1), -sp / (2.0 * s1),
                         dR1 * sp / s1 - (I3 * cp + R * sp) / (2.0 * I1 * s1),
                         dR1 * cp / s1 - (-I3 * sp + R * cp) / (2.0 * I1 * s1)])
        dR2 = I1 / (2.0 * R)
        col2 = np.array([z, z, dR2 * sp / s1, dR2 * cp / s1])
        dR3 = -I3 / R
        col3 = np.array([z, z, (cp + dR3 * sp) / s1, (-sp + dR3 * cp) / s1])
        return np.stack([col1, col2, col3], axis=1)


# ---------------------------------------------------------------------------
# Stand-alone formulas
# ---------------------------------------------------------------------------

def euler_parametrization(I1, I2, theta, model=None):
    """``G(I1, I2, theta)`` of the Euler system (default coefficients ``a = (1, -2, 1)``).

    Returns ``(I2 cn(sqrt2 I1 lam theta), -sqrt2 I2 sn(.), I1 dn(.))``
    with modulus ``I2 / I1`` and ``lam = P(I) / T``.
    """
    model = model or GeneralizedEuler()
    if not (I1 > I2 > 0.0):
        raise DomainError(f"Euler parametrization requires I1 > I2 > 0, got ({I1}, {I2})")
    return model.parametrization((I1, I2), theta)


def euler_period(I1, I2, model=None):
    """Period ``4 K(k) / mu`` of the unperturbed Euler orbit at level (I1, I2)."""
    model = model or GeneralizedEuler()
    if not (I1 > I2 > 0.0):
        raise DomainError(f"Euler period requires I1 > I2 > 0, got ({I1}, {I2})")
    return model.period((I1, I2))


def oscillator_parametrization(I1, I2, I3, theta0):
    """Counter-clockwise parametrization of the coupled-oscillator orbits.

    Returns ``(sqrt I1 cos th, sqrt I1 sin th, (I3 cos th - R sin th)/sqrt I1,
    (I3 sin th + R cos th)/sqrt I1)`` with ``R = sqrt(I1 I2 - I3^2)``.  This
    phase runs against the flow of ``w (y1, -x1, y2, -x2)``;
    ``CoupledOscillator.parametrization(I, theta)`` equals this formula at
    ``-theta`` (for T = 2 pi).
    """
    if not (I1 > 0.0 and I2 > 0.0):
        raise DomainError("oscillator parametrization requires I1 > 0 and I2 > 0")
    disc = I1 * I2 - I3 ** 2
    if disc < 0.0:
        raise DomainError(f"I1*I2 - I3^2 = {disc} < 0")
    R = np.sqrt(disc)
    s1 = np.sqrt(I1)
    c, s = np.cos(theta0), np.sin(theta0)
    return np.array([s1 * c, s1 * s, (I3 * c - R * s) / s1, (I3 * s + R * c) / s1])


def resonance_check(model, I0, tol=1e-8, max_order=32):
    """Smallest ``(m, n)`` (by ``m + n``) with ``|m P(I0) - n T| < tol T``.

    Returns a :class:`ResonanceSpec` or None.
    """
    P = model.period(I0)
    T = model.T
    for total in range(2, 2 * max_order + 1):
        for n in range(1, total):
            m = total - n
            if m > max_order or n > max_order or gcd(m, n) != 1:
                continue
            if abs(m * P - n * T) < tol * T:
                return ResonanceSpec(m, n)
    return None


SYSTEMS = {
    "linear_oscillator": LinearOscillator,
    "generalized_euler": GeneralizedEuler,
    "coupled_oscillator": CoupledOscillator,
}


def build_system(name, **params):
    """Instantiate a built-in system by name with parameter overrides."""
    try:
        cls = SYSTEMS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}") from None
    return cls(**params)
