"""Geometry of the domains ``Omega_t = {z in D : t < T_z}``.

Along each ray ``r e^{i theta}`` the boundary radius ``R_t(theta)`` is found by
bisection on the exit-time predicate.  A ray whose radius reaches the unit
circle (within ``10 * tol``) is a circle-boundary point; otherwise the
boundary point is interior to the disc (``theta`` in ``I_t``).
"""
from dataclasses import dataclass, field

import numpy as np

from . import flow
from .errors import DivergenceError, DomainError, IntegrationError

__all__ = [
    "DomainSnapshot", "contains", "exit_times", "h_t_value", "clustered_angles",
    "trace_boundary", "boundary_derivative_limit", "variational_boundary_estimate",
    "x_endpoints", "is_simple_closed", "nested",
]

INTERIOR, CIRCLE = "interior-boundary", "circle-boundary"
DIVERGENT = -1e300


@dataclass
class DomainSnapshot:
    t: float
    theta: np.ndarray
    r: np.ndarray
    kind: np.ndarray
    x_minus: float
    x_plus: float
    tol: float
    threshold: float
    flags: dict = field(default_factory=dict)

    @property
    def points(self):
        return self.r * np.exp(1j * self.theta)

    @property
    def boundary(self):
        return list(zip(self.theta.tolist(), self.r.tolist(), self.kind.tolist()))


def exit_times(z, t, init, tol=flow.DEFAULT_TOL):
    """Exit times of the seeds ``z``, ``inf`` for seeds still inside at ``t``."""
    b = flow.integrate_many(z, init, t, rtol=tol, atol=tol)
    if np.any(b.status == flow.FAILED):
        raise IntegrationError(f"integration failed: {b.messages}")
    out = np.where(b.status == flow.EXITED, b.exit_time, np.inf)
    return out


def contains(z, t, init, tol=flow.DEFAULT_TOL):
    """``True`` where the characteristic from ``z`` is still in the disc at ``t``."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise DomainError("contains needs |z| < 1")
    if t == 0:
        return np.ones(z.shape, dtype=bool) if z.ndim else True
    res = np.isinf(exit_times(z.ravel(), t, init, tol)).reshape(z.shape)
    return bool(res) if z.ndim == 0 else res


def h_t_value(r, theta, t, init, tol=flow.DEFAULT_TOL):
    """``h_t(r, e^{i theta}) = ln|phi_t(r e^{i theta})| / ln r``.

    Positive exactly on ``Omega_t``.  Characteristics are continued past the
    circle so the value is also meaningful (negative) outside.  A
    characteristic that runs into +-1 cannot be continued; it gets the
    sentinel ``-1e300``.
    """
    r = np.asarray(r, dtype=float)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), r.shape)
    if np.any((r <= 0) | (r >= 1)):
        raise DomainError("h_t needs 0 < r < 1")
    if t == 0:
        out = np.ones(r.shape)
        return float(out) if out.ndim == 0 else out
    z = (r * np.exp(1j * theta)).ravel()
    b = flow.integrate_many(z, init, t, rtol=tol, atol=tol, stop_at_exit=False)
    with np.errstate(divide="ignore"):
        h = np.log(np.abs(b.phi)) / np.log(r.ravel())
    h = np.where(b.status == flow.FAILED, DIVERGENT, h).reshape(r.shape)
    return float(h) if h.ndim == 0 else h


def clustered_angles(n, strength=0.5):
    """``n`` angles on (-pi, pi], denser near 0 and pi, symmetric under negation."""
    s = -np.pi + 2 * np.pi * (np.arange(n) + 1) / n
    return s - 0.5 * strength * np.sin(2 * s)


def _coarse_radii(tol):
    lin = np.linspace(0, 1, 33)[1:-1]
    tail = 1 - np.logspace(-2, np.log10(max(tol, 1e-12)), 6)
    return np.unique(np.concatenate([lin, tail]))


def trace_boundary(t, n_theta, init, tol=1e-6, threshold_factor=10.0, angles=None,
                   integ_tol=flow.DEFAULT_TOL):
    """Boundary of ``Omega_t`` sampled on ``n_theta`` rays.

    Each ray is scanned on a coarse radius grid, then the first
    inside-to-outside bracket is narrowed to width ``tol``.  A ray whose
    membership switches back to inside after leaving is flagged as
    non-monotone in ``snapshot.flags``.
    """
    if t <= 0:
        raise DomainError("trace_boundary needs t > 0")
    theta = clustered_angles(n_theta) if angles is None else np.asarray(angles, float)
    n = theta.size
    radii = _coarse_radii(tol)
    zz = radii[None, :] * np.exp(1j * theta[:, None])
    inside = contains(zz.ravel(), t, init, integ_tol).reshape(zz.shape)

    outside = ~inside
    first_out = np.where(outside.any(axis=1), outside.argmax(axis=1), radii.size)
    after = np.arange(radii.size)[None, :] >= first_out[:, None]
    non_monotone = np.nonzero((inside & after).any(axis=1))[0]

    lo = np.where(first_out > 0, radii[np.maximum(first_out - 1, 0)], 0.0)
    hi = np.where(first_out < radii.size, radii[np.minimum(first_out, radii.size - 1)], 1.0)
    lo, hi = _refine(theta, lo, hi, t, init, tol, integ_tol, fan=8)

    r = 0.5 * (lo + hi)
    threshold = 1 - threshold_factor * tol
    circle = r > threshold
    r = np.where(circle, 1.0, r)
    kind = np.where(circle, CIRCLE, INTERIOR).astype(object)
    xm, xp, xflags = x_endpoints(t, init, integ_tol)
    flags = {"non_monotone_rays": non_monotone.tolist(), **xflags}
    return DomainSnapshot(t=t, theta=theta, r=r, kind=kind, x_minus=xm, x_plus=xp,
                          tol=tol, threshold=threshold, flags=flags)


def _richardson(values):
    """Extrapolate ``values[k] = f(h 2^-k)`` to ``h -> 0`` (polynomial in h)."""
    table = [np.asarray(values, dtype=float)]
    for j in range(1, len(values)):
        prev = table[-1]
        table.append((2 ** j * prev[1:] - prev[:-1]) / (2 ** j - 1))
    return float(table[-1][0])


def boundary_derivative_limit(theta, t, init, eps0=1e-2, levels=6, tol=flow.DEFAULT_TOL):
    """``lim_{r->1} (1 - |phi_t(r e^{i theta})|^2) / (-ln r)`` by Richardson extrapolation.

    Uses ``r_k = 1 - eps0 2^-k``.  Raises :class:`DivergenceError` when one of
    the sample points has left ``Omega_t`` (``theta`` in ``I_t``).
    """
    r = 1 - eps0 * 2.0 ** -np.arange(levels)
    if t == 0:
        vals = (1 - r ** 2) / -np.log(r)
        return _richardson(vals)
    b = flow.integrate_many(r * np.exp(1j * theta), init, t, rtol=tol, atol=tol)
    if np.any(b.status != flow.ALIVE):
        raise DivergenceError(f"theta={theta!r} lies in I_t at t={t!r}", DIVERGENT)
    vals = (1 - np.abs(b.phi) ** 2) / -np.log(r)
    return _richardson(vals)


def variational_boundary_estimate(theta, t, init, r=1 - 1e-6, tol=flow.DEFAULT_TOL):
    """``2 Re(z phi_t'(z) / phi_t(z))`` at ``z = r e^{i theta}`` from the flow's ``v``."""
    z = r * np.exp(1j * theta)
    b = flow.integrate_many(np.array([z]), init, t, rtol=tol, atol=tol)
    if b.status[0] != flow.ALIVE:
        raise DivergenceError(f"theta={theta!r} lies in I_t at t={t!r}", DIVERGENT)
    return float(2 * (z * b.v[0] / b.phi[0]).real)


def _refine(theta, lo, hi, t, init, width, tol, fan):
    """Shrink per-ray brackets ``[lo, hi]`` (inside at lo, outside at hi).

    Each round tests ``fan`` interior radii on every open ray at once, so
    the bracket shrinks by a factor ``fan + 1`` per integration batch.
    """
    lo, hi = lo.copy(), hi.copy()
    while True:
        idx = np.nonzero(hi - lo > width)[0]
        if idx.size == 0:
            return lo, hi
        frac = np.arange(1, fan + 1) / (fan + 1)
        grid = lo[idx, None] + (hi - lo)[idx, None] * frac[None, :]
        ins = contains(grid * np.exp(1j * theta[idx, None]), t, init, tol)
        # first outside node per ray; monotone along the ray by construction
        k = np.where(ins.all(axis=1), fan, np.argmin(ins, axis=1))
        rows = np.arange(idx.size)
        lo[idx] = np.where(k > 0, grid[rows, np.maximum(k - 1, 0)], lo[idx])
        hi[idx] = np.where(k < fan, grid[rows, np.minimum(k, fan - 1)], hi[idx])


def x_endpoints(t, init, tol=flow.DEFAULT_TOL, xtol=1e-12, edge=1e-6, fan=64):
    """Real-axis endpoints ``x_-(t) < 0 < x_+(t)`` of ``Omega_t``.

    ``Omega_t`` meets the real axis in an interval around 0, so on each side
    the membership predicate switches once; both sides are bracketed
    together to width ``xtol``.  When a side is still inside at ``1 - edge``
    (possible when ``a`` or ``b`` vanishes) the endpoint is reported as
    ``-1`` or ``+1`` and flagged as touching.
    """
    if t <= 0:
        raise DomainError("x_endpoints needs t > 0")
    theta = np.array([np.pi, 0.0])
    far = contains((1 - edge) * np.array([-1.0, 1.0]), t, init, tol)
    lo, hi = _refine(theta[~far], np.zeros((~far).sum()), np.full((~far).sum(), 1 - edge),
                     t, init, xtol, tol, fan)
    r = np.ones(2)
    r[~far] = 0.5 * (lo + hi)
    flags = {f"{name}_touches_circle": True
             for name, f in zip(("x_minus", "x_plus"), far) if f}
    return -float(r[0]), float(r[1]), flags


def _segments_intersect(p, q):
    """Pairwise proper intersection test between segments ``p[i]`` and ``q[j]``."""
    def orient(a, b, c):
        return np.sign(((b - a).conj() * (c - a)).imag)
    a, b = p[:, 0][:, None], p[:, 1][:, None]
    c, d = q[:, 0][None, :], q[:, 1][None, :]
    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def is_simple_closed(points):
    """True when the closed polyline through ``points`` has no self-intersection."""
    pts = np.asarray(points, dtype=complex)
    seg = np.stack([pts, np.roll(pts, -1)], axis=1)
    n = len(seg)
    hits = _segments_intersect(seg, seg)
    i, j = np.nonzero(np.triu(hits, k=2))
    # first and last segments share a vertex
    bad = ~((i == 0) & (j == n - 1))
    return not np.any(bad)


def nested(inner, outer, tol=None):
    """True when ``inner.r <= outer.r + tol`` on every shared ray."""
    if not np.allclose(inner.theta, outer.theta):
        raise DomainError("snapshots use different angle grids")
    tol = max(inner.tol, outer.tol) if tol is None else tol
    return bool(np.all(inner.r <= outer.r + tol))
