"""Explicit formula for ``phi_t`` on the real diameter of its domain.

For real ``z`` in ``(x_-(t), x_+(t))``::

    c = K(0,z)^2 + (a+b)^2
    x = -4z / (1-z)^2
    d = [b^2 x^2 - (sqrt(c) - sqrt(c - (c - a^2 + b^2) x + b^2 x^2))^2] / x
    D = d exp(t sqrt(c))
    phi_t(z) = (sqrt((b^2-a^2-c-D)^2 - 4a^2 c) - sqrt((b^2-a^2+c-D)^2 - 4b^2 c))^2 / (4 c D)

No branch prescription comes with the formula.  ``c`` and ``d`` use principal
roots; the two numerator roots are continued in ``t`` from ``t = 0``, where the
sign combination reproducing ``phi_0(z) = z`` is selected.  This module is an
independent check on the ODE integrator, not a replacement for it.
"""
from dataclasses import dataclass

import numpy as np

from .errors import BranchError, DomainError
from .transforms import phi_weight

__all__ = ["ClosedFormContext", "context", "phi_real", "phi_real_raw"]

DEFAULT_DT = 0.01
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class ClosedFormContext:
    z: float
    c: complex
    d: complex
    x: complex


def _as_real_seed(z):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        if np.any(np.abs(z.imag) > 0):
            raise DomainError("the closed form only holds on the real axis")
        z = z.real
    z = z.astype(float)
    if np.any(np.abs(z) >= 1):
        raise DomainError("z must lie in (-1, 1)")
    return z


def context(z, init):
    """``(c, d, x)`` at a real ``z != 0``."""
    zf = float(_as_real_seed(z))
    if zf == 0:
        raise DomainError("x and d are singular at z = 0 (phi_t(0) = 0 by convention)")
    c, d, x = _cdx(np.array([zf]), init)
    return ClosedFormContext(z=zf, c=complex(c[0]), d=complex(d[0]), x=complex(x[0]))


def _cdx(z, init):
    p = init.params
    a2, b2 = p.a ** 2, p.b ** 2
    zc = z.astype(complex)
    k0sq = init.herglotz0(zc) ** 2 - phi_weight(zc, p) ** 2
    c = k0sq + (p.a + p.b) ** 2
    x = -4.0 * zc / (1 - zc) ** 2
    inner = np.sqrt(c - (c - a2 + b2) * x + b2 * x * x)
    d = (b2 * x * x - (np.sqrt(c) - inner) ** 2) / x
    return c, d, x


def _radicands(t, c, d, p):
    a2, b2 = p.a ** 2, p.b ** 2
    D = d * np.exp(t * np.sqrt(c))
    A = (b2 - a2 - c - D) ** 2 - 4 * a2 * c
    B = (b2 - a2 + c - D) ** 2 - 4 * b2 * c
    return A, B, D


def _closest(root, ref):
    return np.where(np.abs(root - ref) <= np.abs(root + ref), root, -root)


def phi_real_raw(t, z, init, dt=DEFAULT_DT):
    """Evaluate the formula with continued branches, without domain checks.

    ``z`` may be an array of nonzero reals; returns complex values.
    """
    z = np.atleast_1d(_as_real_seed(z))
    if np.any(z == 0):
        raise DomainError("use phi_real for z = 0")
    p = init.params
    c, d, _ = _cdx(z, init)
    A, B, D = _radicands(0.0, c, d, p)
    sa, sb = np.sqrt(A), np.sqrt(B)
    target = z * 4 * c * D
    minus, plus = (sa - sb) ** 2, (sa + sb) ** 2
    sb = np.where(np.abs(minus - target) <= np.abs(plus - target), sb, -sb)
    val0 = (sa - sb) ** 2 / (4 * c * D)
    if np.any(np.abs(val0 - z) > 1e-8 * np.maximum(1.0, np.abs(z))):
        raise BranchError("no branch combination reproduces phi_0(z) = z")
    # with a = 0 (b = 0) the radicand A (B) is a perfect square; its double
    # zero is not a branch point, so follow the polynomial root itself
    a2, b2 = p.a ** 2, p.b ** 2
    sign_a = _sign_of(sa, b2 - c - _radicands(0.0, c, d, p)[2]) if p.a == 0 else None
    sign_b = _sign_of(sb, b2 - a2 + c - _radicands(0.0, c, d, p)[2]) if p.b == 0 else None
    n = max(1, int(np.ceil(abs(t) / dt)))
    for tk in np.linspace(0.0, t, n + 1)[1:]:
        A, B, D = _radicands(tk, c, d, p)
        sa = sign_a * (b2 - c - D) if sign_a is not None else _closest(np.sqrt(A), sa)
        sb = sign_b * (b2 - a2 + c - D) if sign_b is not None else _closest(np.sqrt(B), sb)
    return (sa - sb) ** 2 / (4 * c * D)


def _sign_of(root, poly):
    return np.where(np.abs(root - poly) <= np.abs(root + poly), 1.0, -1.0)


def phi_real(t, z, init, dt=DEFAULT_DT):
    """``phi_t(z)`` for real ``z`` in the real interval of the domain.

    Returns a float (or float array).  ``z = 0`` maps to 0.  Raises
    :class:`DomainError` when the value is not real or not inside (-1, 1),
    which happens once ``z`` leaves ``(x_-(t), x_+(t))``.
    """
    zr = _as_real_seed(z)
    scalar = zr.ndim == 0
    zr = np.atleast_1d(zr)
    out = np.zeros(zr.shape)
    nz = zr != 0
    if np.any(nz):
        val = phi_real_raw(t, zr[nz], init, dt)
        if np.any(np.abs(val.imag) > IMAG_TOL * np.maximum(1.0, np.abs(val))):
            raise DomainError("closed form is not real here: z outside (x_-(t), x_+(t))")
        if np.any(np.abs(val.real) >= 1):
            raise DomainError("closed form leaves (-1, 1): z outside (x_-(t), x_+(t))")
        out[nz] = val.real
    return float(out[0]) if scalar else out
