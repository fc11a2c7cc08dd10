"""Characteristic flow transporting ``H(0, .)`` along ``phi_t``.

Along a characteristic started at ``z`` the state is

    phi = phi_t(z),   w = H(t, phi_t(z)),   v = d phi_t / dz,   u = d w / dz

and it evolves by

    phi' = phi w,     w' = G(phi),     v' = v w + phi u,    u' = G'(phi) v

with ``G(x) = [4(alpha^2+beta^2) x^2 (1+x^2) + 2 alpha beta x (1+6x^2+x^4)] / (1-x^2)^3``
``= 2x (b^2 (1+x)/(1-x)^3 - a^2 (1-x)/(1+x)^3)``.  ``+1`` is a pole only when
``b != 0`` and ``-1`` only when ``a != 0``.
Nothing about ``nu_t`` is needed: ``H(t, .)`` is defined along the
characteristics.  Two extra channels accumulate ``int_0^t w ds`` and
``int_0^t s G(phi_s) ds``; they feed the diagnostics.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _rk
from .errors import DomainError, PoleError
from .transforms import h_infinity, phi_weight

__all__ = [
    "FlowState", "Trajectory", "FlowBatch", "forcing", "forcing_deriv",
    "forcing_poly", "flow_rhs", "integrate", "integrate_many",
    "residual_char_eq", "residual_k_subordination", "residual_exp_form",
    "imag_log_bound_violation", "ibp_check", "to_csv",
    "ALIVE", "EXITED", "FAILED",
]

ALIVE, EXITED, FAILED = _rk.ALIVE, _rk.EXITED, _rk.FAILED
STATUS_NAMES = {ALIVE: "alive", EXITED: "exited", FAILED: "failed"}

EPS_EXIT = 1e-9
POLE_GUARD = 1e-12
# a characteristic running into +-1 blows up in finite time; once this close,
# the remaining time is below double resolution of t
POLE_EXIT = 1e-6
DEFAULT_TOL = 1e-10


def forcing(phi, p):
    """``G(phi)``, the right-hand side of ``d/dt H(t, phi_t)``.

    Evaluated as ``2x (b^2 (1+x)/(1-x)^3 - a^2 (1-x)/(1+x)^3)``, which equals
    the polynomial form (:func:`forcing_poly`) but avoids its cancellation
    near a pole whose coefficient vanishes.
    """
    phi = np.asarray(phi, dtype=complex)
    a2, b2 = p.a ** 2, p.b ** 2
    out = np.zeros_like(phi)
    if b2:
        out = out + b2 * (1 + phi) / (1 - phi) ** 3
    if a2:
        out = out - a2 * (1 - phi) / (1 + phi) ** 3
    return 2 * phi * out


def forcing_deriv(phi, p):
    """Closed-form derivative ``G'(phi)``."""
    phi = np.asarray(phi, dtype=complex)
    a2, b2 = p.a ** 2, p.b ** 2
    x2 = phi * phi
    out = np.zeros_like(phi)
    if b2:
        out = out + b2 * (1 + 4 * phi + x2) / (1 - phi) ** 4
    if a2:
        out = out - a2 * (1 - 4 * phi + x2) / (1 + phi) ** 4
    return 2 * out


def forcing_poly(phi, p):
    """``G`` in the ``alpha, beta`` polynomial form, for cross-checks."""
    phi = np.asarray(phi, dtype=complex)
    s, q = p.alpha ** 2 + p.beta ** 2, p.alpha * p.beta
    x2 = phi * phi
    num = 4 * s * x2 * (1 + x2) + 2 * q * phi * (1 + 6 * x2 + x2 * x2)
    return num / (1 - x2) ** 3


@dataclass(frozen=True)
class FlowState:
    t: float
    phi: complex
    w: complex
    v: complex
    u: complex


def flow_rhs(state, p):
    """Time derivatives ``(dphi, dw, dv, du)`` of a :class:`FlowState`."""
    phi = complex(state.phi)
    if abs(1 - phi * phi) < POLE_GUARD:
        raise PoleError("phi too close to +-1")
    g = complex(forcing(phi, p))
    dg = complex(forcing_deriv(phi, p))
    return (phi * state.w, g, state.v * state.w + phi * state.u, dg * state.v)


def _system(p):
    trivial = p.alpha == 0 and p.beta == 0

    def rhs(t, y):
        phi, w, v, u = y[0], y[1], y[2], y[3]
        out = np.empty_like(y)
        out[0] = phi * w
        out[2] = v * w + phi * u
        out[4] = w
        if trivial:
            out[1] = 0
            out[3] = 0
            out[5] = 0
        else:
            out[1] = forcing(phi, p)
            out[3] = forcing_deriv(phi, p) * v
            out[5] = t * out[1]
        return out

    return rhs


def _pole_distance(phi, poles):
    d = np.full(phi.shape, np.inf)
    for pole in poles:
        d = np.minimum(d, np.abs(phi - pole))
    return d


def _clamp(stop_at_exit, poles):
    def clamp(t, y, f):
        phi = y[0]
        speed = np.abs(f[0])
        hmax = np.full(phi.shape, np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            if poles:
                dpole = _pole_distance(phi, poles)
                hmax = np.where(speed > 0, 0.5 * dpole / speed, hmax)
            if stop_at_exit:
                radial = np.abs(phi) * y[1].real
                lim = 0.5 * (1 - np.abs(phi)) / radial
                hmax = np.where(radial > 0, np.minimum(hmax, lim), hmax)
        return hmax
    return clamp


def _reject(poles):
    def reject(y):
        return _pole_distance(y[0], poles) < POLE_GUARD
    return reject


def _at_pole(poles):
    def at_pole(y):
        return _pole_distance(y[0], poles) < POLE_EXIT
    return at_pole


def _active_poles(p):
    return tuple(x for x, c in ((1.0, p.b), (-1.0, p.a)) if c != 0)


# Re H(t, .) tends to the boundary density near the circle; close to a pole
# |w| is so large that roundoff alone can flip its sign in this shell
POSITIVITY_SHELL = 1e-6
GRAZE_SHELL = 1e-5


def _graze(y):
    """Near the circle with ``Re w <= 0``: ``|phi|`` has stopped growing at the
    boundary, i.e. the characteristic met it within the attainable accuracy."""
    return (np.abs(y[0]) > 1 - GRAZE_SHELL) & (y[1].real <= 0)


def _positivity(y):
    inside = np.abs(y[0]) < 1 - POSITIVITY_SHELL
    w = y[1]
    return inside & (w.real < -1e-8 * np.maximum(1.0, np.abs(w)))


@dataclass
class FlowBatch:
    """End states of many characteristics integrated together."""

    z0: np.ndarray
    t: np.ndarray
    y: np.ndarray
    status: np.ndarray
    exit_time: np.ndarray
    horizon: np.ndarray
    messages: dict = field(default_factory=dict)

    phi = property(lambda self: self.y[0])
    w = property(lambda self: self.y[1])
    v = property(lambda self: self.y[2])
    u = property(lambda self: self.y[3])
    log_integral = property(lambda self: self.y[4])
    ibp_integral = property(lambda self: self.y[5])

    @property
    def alive(self):
        return self.status == ALIVE


@dataclass
class Trajectory:
    """Time samples of one characteristic (one entry per accepted step)."""

    z0: complex
    t: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    v: np.ndarray
    u: np.ndarray
    log_integral: np.ndarray
    ibp_integral: np.ndarray
    exit_time: Optional[float]
    status: str
    horizon: float
    message: str = ""

    @property
    def states(self):
        return [FlowState(*row) for row in zip(self.t, self.phi, self.w, self.v, self.u)]

    @property
    def censored(self):
        """True when the horizon was reached before any exit."""
        return self.status == "alive"


def _initial_state(z0, init):
    z0 = np.asarray(z0, dtype=complex).ravel()
    if np.any(np.abs(z0) >= 1):
        raise DomainError("seeds must lie in the open unit disc")
    y0 = np.zeros((6, z0.size), dtype=complex)
    y0[0] = z0
    y0[1] = init.herglotz0(z0)
    y0[2] = 1.0
    y0[3] = init.herglotz0_deriv(z0)
    return z0, y0


def _solve(z0, init, horizon, rtol, atol, eps_exit, stop_at_exit, record):
    z0, y0 = _initial_state(z0, init)
    p = init.params
    poles = _active_poles(p)
    res = _rk.solve_batch(
        _system(p), y0, horizon, rtol=rtol, atol=atol,
        event=lambda y: np.abs(y[0]) - (1.0 - eps_exit),
        terminal=stop_at_exit,
        clamp=_clamp(stop_at_exit, poles), reject=_reject(poles),
        check=_positivity if stop_at_exit else None,
        graze=_graze if stop_at_exit else None,
        pole_exit=_at_pole(poles) if poles else None, record=record,
    )
    if not stop_at_exit:
        # continuation past the circle: report whether the seed ever left
        left = ~np.isnan(res.event_time) & (res.status == ALIVE)
        res.status[left] = EXITED
    return z0, res


def integrate_many(z0, init, horizon, rtol=DEFAULT_TOL, atol=DEFAULT_TOL,
                   eps_exit=EPS_EXIT, stop_at_exit=True):
    """Integrate a batch of seeds to ``horizon`` (scalar or per seed).

    With ``stop_at_exit`` a characteristic stops as soon as
    ``|phi| >= 1 - eps_exit``.  Otherwise it is continued past the circle
    (the system is analytic there apart from the poles at +-1); the first
    crossing time is still reported and the status is ``EXITED``.
    """
    z0, res = _solve(z0, init, horizon, rtol, atol, eps_exit, stop_at_exit, False)
    return FlowBatch(z0=z0, t=res.t, y=res.y, status=res.status,
                     exit_time=res.event_time,
                     horizon=np.broadcast_to(np.asarray(horizon, float), z0.shape).copy(),
                     messages=res.messages)


def integrate(z0, init, horizon, tol=DEFAULT_TOL, eps_exit=EPS_EXIT, rtol=None, atol=None):
    """Integrate the characteristic from a single seed, keeping every step."""
    rtol = tol if rtol is None else rtol
    atol = tol if atol is None else atol
    zz, res = _solve(np.array([z0]), init, horizon, rtol, atol, eps_exit, True, True)
    t, y = res.lane_samples(0)
    status = STATUS_NAMES[int(res.status[0])]
    et = float(res.event_time[0])
    return Trajectory(z0=complex(zz[0]), t=t, phi=y[0], w=y[1], v=y[2], u=y[3],
                      log_integral=y[4], ibp_integral=y[5],
                      exit_time=None if np.isnan(et) else et, status=status,
                      horizon=float(horizon), message=res.messages.get(0, ""))


def residual_char_eq(traj, init, p=None):
    """``max |w^2 - H_inf(phi)^2 - (H(0,z)^2 - H_inf(z)^2)|`` over the samples."""
    p = init.params if p is None else p
    z = np.array([traj.z0])
    rhs = init.herglotz0(z)[0] ** 2 - h_infinity(z, p)[0] ** 2
    inside = np.abs(traj.phi) < 1
    lhs = traj.w[inside] ** 2 - h_infinity(traj.phi[inside], p) ** 2
    return float(np.max(np.abs(lhs - rhs), initial=0.0))


def residual_k_subordination(traj, init, p=None):
    """``max |(w^2 - Phi(phi)^2) - (H(0,z)^2 - Phi(z)^2)|``, i.e. K^2 is transported."""
    p = init.params if p is None else p
    z = np.array([traj.z0])
    k0 = init.herglotz0(z)[0] ** 2 - phi_weight(z, p)[0] ** 2
    kt = traj.w ** 2 - phi_weight(traj.phi, p) ** 2
    return float(np.max(np.abs(kt - k0), initial=0.0))


def residual_exp_form(traj):
    """``max |phi_t - z exp(int_0^t w ds)|`` over the samples."""
    return float(np.max(np.abs(traj.phi - traj.z0 * np.exp(traj.log_integral)), initial=0.0))


def imag_log_bound_violation(traj):
    """Largest excess of ``|Im int_0^t w ds|`` over ``-2|phi_t| ln|z| / (1-|phi_t|^2)``.

    Non-positive when the bound holds at every sample.
    """
    if traj.z0 == 0:
        return 0.0
    mod = np.abs(traj.phi)
    keep = mod < 1
    bound = -2 * mod[keep] * np.log(abs(traj.z0)) / (1 - mod[keep] ** 2)
    return float(np.max(np.abs(traj.log_integral[keep].imag) - bound, initial=-np.inf))


def ibp_check(traj):
    """``max |t w - int_0^t w ds - int_0^t s G(phi_s) ds|`` over the samples."""
    return float(np.max(np.abs(traj.t * traj.w - traj.log_integral - traj.ibp_integral),
                        initial=0.0))


def to_csv(traj, path):
    """Write the trajectory columns t, Re/Im of phi, w, v, u."""
    cols = [traj.t, traj.phi.real, traj.phi.imag, traj.w.real, traj.w.imag,
            traj.v.real, traj.v.imag, traj.u.real, traj.u.imag]
    header = "t,re_phi,im_phi,re_w,im_w,re_v,im_v,re_u,im_u"
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
