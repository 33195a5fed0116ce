"""Jacobi elliptic functions and the complete elliptic integral K(k).

All routines use the *modulus* convention: ``k`` is the modulus, not the
parameter ``m = k**2``.  Arguments ``u`` may be scalars or numpy arrays.

The quarter period is computed with the arithmetic-geometric mean and
sn, cn, dn with the descending Landen transformation.  Arguments are
reduced modulo the real period 4K before the recursion so that accuracy
does not degrade over long integration times.
"""

from functools import lru_cache

import numpy as np

from .errors import DomainError

__all__ = ["complete_K", "jacobi_sn_cn_dn", "jacobi_nd", "check_modulus"]

_MAX_AGM_STEPS = 64


def check_modulus(k):
    """Validate an elliptic modulus and return it as a float."""
    k = float(k)
    if not np.isfinite(k) or k < 0.0 or k >= 1.0:
        raise DomainError(f"elliptic modulus must satisfy 0 <= k < 1, got {k!r}")
    return k


@lru_cache(maxsize=256)
def _agm_ladder(k):
    # Descending sequence (a_n, c_n) with a_0 = 1, b_0 = k', c_0 = k.
    a, b, c = 1.0, np.sqrt((1.0 - k) * (1.0 + k)), k
    a_seq, c_seq = [a], [c]
    for _ in range(_MAX_AGM_STEPS):
        if abs(c) <= 2.0 * np.finfo(float).eps * a:
            break
        a, b, c = 0.5 * (a + b), np.sqrt(a * b), 0.5 * (a - b)
        a_seq.append(a)
        c_seq.append(c)
    else:  # pragma: no cover - quadratic convergence makes this unreachable
        raise DomainError(f"AGM did not converge for k={k!r}")
    return tuple(a_seq), tuple(c_seq)


def complete_K(k):
    """Complete elliptic integral of the first kind, K(k).

    Parameters
    ----------
    k : float
        Elliptic modulus, ``0 <= k < 1``.

    Returns
    -------
    float
        ``pi / (2 * agm(1, sqrt(1 - k**2)))``.
    """
    k = check_modulus(k)
    a_seq, _ = _agm_ladder(k)
    return np.pi / (2.0 * a_seq[-1])


def jacobi_sn_cn_dn(u, k):
    """Return ``(sn, cn, dn)`` evaluated at ``u`` for modulus ``k``.

    Parameters
    ----------
    u : float or array_like
        Real argument(s).
    k : float
        Elliptic modulus, ``0 <= k < 1``.

    Returns
    -------
    sn, cn, dn : float or ndarray
        Same shape as ``u``.
    """
    k = check_modulus(k)
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    a_seq, c_seq = _agm_ladder(k)
    quarter = np.pi / (2.0 * a_seq[-1])
    period = 4.0 * quarter

    # Reduce to [-2K, 2K).
    ur = u - period * np.floor((u + 2.0 * quarter) / period)

    n = len(a_seq) - 1
    phi = (2.0**n) * a_seq[-1] * ur
    for j in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c_seq[j] / a_seq[j] * np.sin(phi)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    # dn >= k' > 0, so the square root is well conditioned and never
    # suffers the 0/0 of the cosine-ratio formula at odd multiples of K.
    dn = np.sqrt(1.0 - (k * sn) ** 2)
    if scalar:
        return float(sn), float(cn), float(dn)
    return sn, cn, dn


def jacobi_nd(u, k):
    """Glaisher's nd(u, k) = 1 / dn(u, k)."""
    _, _, dn = jacobi_sn_cn_dn(u, k)
    return 1.0 / dn
