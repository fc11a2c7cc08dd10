"""Closed-form analytic transforms.

Conventions
-----------
``alpha = tau(R)`` and ``beta = tau(S)`` are the traces of the symmetries
``R = 2P - 1`` and ``S = 2Q - 1``.  From them

    a = |alpha - beta| / 2,        b = |alpha + beta| / 2.

The stationary Herglotz transform (the freely independent state) is

    H_inf(z)^2 = 1 + 4 z (alpha beta (1+z)^2 + (alpha-beta)^2 z) / (1-z^2)^2

and the weight entering K is

    Phi(z) = a (1-z)/(1+z) + b (1+z)/(1-z).

All functions accept scalars or numpy arrays and broadcast.
"""
from dataclasses import dataclass

import numpy as np

from .errors import BranchError, DomainError, PoleError

__all__ = [
    "TraceParams", "h_infinity", "h_infinity_deriv", "phi_weight",
    "phi_weight_deriv", "k_eval", "k_infinity_constant", "disc_root",
    "nu_to_mu_herglotz", "mu_to_nu_herglotz",
]

_POLE_TOL = 1e-14


@dataclass(frozen=True)
class TraceParams:
    """Traces of the two symmetries; ``a`` and ``b`` are derived."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v) or abs(v) > 1.0:
                raise DomainError(f"{name}={v!r} outside [-1, 1]")

    @property
    def a(self):
        return abs(self.alpha - self.beta) / 2.0

    @property
    def b(self):
        return abs(self.alpha + self.beta) / 2.0

    @classmethod
    def from_projections(cls, p, q):
        """Build from the traces of the projections ``P`` and ``Q``."""
        return cls(2.0 * p - 1.0, 2.0 * q - 1.0)

    def as_dict(self):
        return {"alpha": self.alpha, "beta": self.beta, "a": self.a, "b": self.b}


def _check_disc(z):
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("argument must lie in the open unit disc")
    return z


def _radicand(z, p):
    al, be = p.alpha, p.beta
    num = 4.0 * z * (al * be * (1 + z) ** 2 + (al - be) ** 2 * z)
    return 1.0 + num / (1 - z * z) ** 2


def h_infinity(z, p):
    """Herglotz transform of the stationary (free) spectral distribution.

    The principal square root is used.  Since the true function has positive
    real part throughout the disc, its square never meets the negative axis
    there, and the principal branch is the continuous one with value 1 at 0.
    """
    z = _check_disc(z)
    return np.sqrt(_radicand(z, p))


def h_infinity_deriv(z, p):
    """Complex derivative of :func:`h_infinity`."""
    z = _check_disc(z)
    al, be = p.alpha, p.beta
    num = 4.0 * al * be * z * (1 + z) ** 2 + 4.0 * (al - be) ** 2 * z * z
    dnum = 4.0 * al * be * (1 + z) * (1 + 3 * z) + 8.0 * (al - be) ** 2 * z
    q = 1 - z * z
    drad = dnum / q ** 2 + 4.0 * z * num / q ** 3
    return drad / (2.0 * np.sqrt(_radicand(z, p)))


def _pole_guard(z, p):
    if p.a != 0 and np.any(np.abs(1 + z) < _POLE_TOL):
        raise PoleError("Phi has a pole at z = -1 when a != 0")
    if p.b != 0 and np.any(np.abs(1 - z) < _POLE_TOL):
        raise PoleError("Phi has a pole at z = +1 when b != 0")


def phi_weight(z, p):
    """``a (1-z)/(1+z) + b (1+z)/(1-z)``; zero-coefficient terms are skipped."""
    z = np.asarray(z, dtype=complex)
    _pole_guard(z, p)
    out = np.zeros_like(z)
    if p.a != 0:
        out = out + p.a * (1 - z) / (1 + z)
    if p.b != 0:
        out = out + p.b * (1 + z) / (1 - z)
    return out


def phi_weight_deriv(z, p):
    z = np.asarray(z, dtype=complex)
    _pole_guard(z, p)
    out = np.zeros_like(z)
    if p.a != 0:
        out = out - 2.0 * p.a / (1 + z) ** 2
    if p.b != 0:
        out = out + 2.0 * p.b / (1 - z) ** 2
    return out


def k_eval(hval, z, p, ref=None):
    """``sqrt(hval^2 - Phi(z)^2)``.

    Without ``ref`` the principal root is returned, which at ``z = 0`` gives
    ``sqrt(1 - (a+b)^2) >= 0``.  With ``ref`` (a previous value along a path)
    the sign closest to ``ref`` is chosen, which keeps the branch continuous
    when walking outward from 0 in small increments.
    """
    hval = np.asarray(hval, dtype=complex)
    k = np.sqrt(hval * hval - phi_weight(z, p) ** 2)
    if ref is not None:
        ref = np.asarray(ref, dtype=complex)
        flip = np.abs(k - ref) > np.abs(k + ref)
        k = np.where(flip, -k, k)
    return k


def k_infinity_constant(p):
    """The constant value of ``H_inf(z)^2 - Phi(z)^2``, namely ``1 - (a+b)^2``."""
    return 1.0 - (p.a + p.b) ** 2


def disc_root(w):
    """Root in the unit disc of ``4 z / (1+z)^2 = w``.

    Writing ``s = sqrt(1 - w)`` (principal) the root is ``(1-s)/(1+s)``, which
    lies in the open disc exactly when ``Re s > 0``, i.e. ``w`` is off the cut
    ``[1, inf)``.
    """
    w = np.asarray(w, dtype=complex)
    s = np.sqrt(1.0 - w)
    if np.any(s.real <= 0):
        raise BranchError("both roots of 4z/(1+z)^2 = w lie on the unit circle "
                          "(w on the cut [1, inf))")
    return w / (1.0 + s) ** 2


def mu_to_nu_herglotz(h_mu, p, z):
    """``H_nu(z)`` from the Herglotz-type transform ``H_mu`` of the law of PUQU*.

    ``H_mu(w) = 1 + 2 psi(w)`` with ``psi(w) = sum_{k>=1} m_k w^k``.  The sign
    is fixed so that ``H_nu(0) = 1``::

        H_nu(z) = (1-z)/(1+z) H_mu(4z/(1+z)^2) + 2 (alpha+beta) z / (z^2 - 1)
    """
    z = _check_disc(z)
    w = 4.0 * z / (1 + z) ** 2
    return (1 - z) / (1 + z) * h_mu(w) + 2.0 * (p.alpha + p.beta) * z / (z * z - 1)


def nu_to_mu_herglotz(h_nu, p, w):
    """Inverse of :func:`mu_to_nu_herglotz`, evaluated at ``w`` off ``[1, inf)``."""
    z = disc_root(w)
    return (1 + z) / (1 - z) * (h_nu(z) - 2.0 * (p.alpha + p.beta) * z / (z * z - 1))
