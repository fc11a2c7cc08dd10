"""Inverse flow ``eta_t = phi_t^{-1}``, ``H(t, .)`` and density recovery.

``H(t, omega)`` is the ``w`` component at time ``t`` of the characteristic
started at ``eta_t(omega)``.  ``eta_t`` is found by damped Newton iteration
on ``z -> phi_t(z) - omega``, with the variational derivative ``v`` as the
exact Jacobian, seeded from a cached forward grid.

Densities are Poisson (circle) or Cauchy (interval) smoothings at offset
``epsilon``; atoms are extracted separately and their kernels subtracted.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from . import flow
from .errors import ConvergenceError, DomainError, NegativeDensityError
from .measures import density_grid
from .transforms import disc_root, nu_to_mu_herglotz

__all__ = [
    "DensityProfile", "seed_grid", "eta", "eta_many", "h_eval", "nu_density",
    "atom_mass", "mu_atom_mass", "mu_density", "nu_moment", "mu_moment",
]

MAX_NEWTON = 50
NEWTON_TOL = 5e-11
START_RADIUS_GAP = 0.1
START_RADIUS = 1 - START_RADIUS_GAP
ATOM_THRESHOLD = 0.05
CLIP_TOL = 1e-9
KERNEL_RTOL = 1e-6
MU_EDGE = 1e-3


@dataclass
class DensityProfile:
    """Sampled density plus atoms.

    ``kind`` is ``"nu"`` (grid of angles, density in ``d theta``) or ``"mu"``
    (grid of abscissae in (0, 1)).  ``values`` already have the atom
    kernels removed.
    """

    t: float
    grid: np.ndarray
    values: np.ndarray
    atoms: list
    epsilon: float
    kind: str = "nu"
    threshold: float = ATOM_THRESHOLD
    failures: list = field(default_factory=list)
    quad_weights: np.ndarray = None
    first_moment_samples: np.ndarray = None
    complement: dict = field(default_factory=dict)
    edge_cdf: tuple = None

    @property
    def weights(self):
        if self.quad_weights is not None:
            return self.quad_weights
        if self.kind == "nu":
            return np.full(self.grid.size, 2 * np.pi / self.grid.size)
        return np.gradient(self.grid) if self.grid.size > 1 else np.ones(1)

    @property
    def atom_mass(self):
        return float(sum(m for _, m in self.atoms))

    @property
    def mass(self):
        """Grid quadrature plus atoms plus any edge bands off the grid."""
        return (float(self.values @ self.weights) + self.atom_mass
                + self.complement.get("edge_mass", 0.0))

    @property
    def mass_defect(self):
        return abs(self.mass - 1.0)

    def moment(self, k=1):
        """``k``-th moment, undoing the smoothing of the continuous part.

        On the circle the Poisson smoothing multiplies the ``k``-th Fourier
        moment by ``r^k``, which is divided out.  On the interval the first
        moment integrates ``-Im[zeta G(zeta)] / pi`` along ``Im zeta = eps``
        over the whole line, which is exact; other moments are the raw
        quadrature of the grid values.
        """
        if self.kind == "nu":
            r = 1 - self.epsilon
            cont = (self.values * np.exp(1j * k * self.grid)) @ self.weights / r ** k
            return complex(cont + sum(m * np.exp(1j * k * th) for th, m in self.atoms))
        if k == 1 and self.first_moment_samples is not None:
            cont = self.first_moment_samples @ self.weights + self.complement["first_moment"]
            return float(cont + sum(m * x for x, m in self.atoms))
        cont = (self.values * self.grid ** k) @ self.weights
        return float(cont + sum(m * x ** k for x, m in self.atoms))

    def cdf(self, x, side="right"):
        """Distribution function with atoms as jumps.

        ``side="left"`` gives the left limit at atom locations.  The
        continuous part is the trapezoid cumulative of the samples; on the
        circle it starts at ``-pi`` with the periodic neighbour of the last
        node, on the interval the edge bands sit between 0 and the first
        node and between the last node and 1.
        """
        x = np.asarray(x, dtype=float)
        cell = self.values * self.weights
        if self.kind == "nu":
            nodes = np.concatenate([[-np.pi], self.grid])
            cum = np.concatenate([[0.0], np.cumsum(cell)])
        else:
            left = self.complement.get("edge_mass_left", 0.0)
            right = self.complement.get("edge_mass_right", 0.0)
            mid = np.cumsum(cell) - cell / 2 + left
            total = cell.sum() + left + right
            if self.edge_cdf is None:
                nodes = np.concatenate([[0.0], self.grid, [1.0]])
                cum = np.concatenate([[0.0], mid, [total]])
            else:
                # mass within distance d of each edge, resolved on the band nodes
                d, near_left, near_right = self.edge_cdf
                nodes = np.concatenate([[0.0], d, self.grid, 1 - d[::-1], [1.0]])
                cum = np.concatenate([[0.0], near_left, mid, total - near_right[::-1], [total]])
        out = np.interp(x, nodes, cum)
        snap = 1e-12
        for loc, m in self.atoms:
            hit = x >= loc - snap if side == "right" else x > loc + snap
            out = out + m * hit
        return out

    def header(self):
        return {"kind": self.kind, "t": self.t, "epsilon": self.epsilon,
                "atoms": [{"location": float(a), "mass": float(m)} for a, m in self.atoms],
                "mass": self.mass, "mass_defect": self.mass_defect,
                "atom_threshold": self.threshold, "n": int(self.grid.size),
                "failures": self.failures, **self.complement}


def _polar_radii(n):
    inner = np.linspace(0.0, 0.9, n // 2, endpoint=False)
    outer = 1 - np.logspace(-1, -7, n - n // 2)
    return np.concatenate([inner, outer])


@lru_cache(maxsize=32)
def seed_grid(init, t, n_r=64, n_theta=64, tol=flow.DEFAULT_TOL):
    """Forward images of a polar grid, indexed by a k-d tree on ``phi``.

    Returns ``(tree, z0, phi)`` restricted to nodes that stay in the disc.
    Keyed on the :class:`InitialData` object identity and ``t``.
    """
    r = _polar_radii(n_r)
    th = -np.pi + 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    z0 = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    z0 = np.unique(np.concatenate([[0j], z0[np.abs(z0) > 0]]))
    b = flow.integrate_many(z0, init, t, rtol=tol, atol=tol)
    keep = b.status == flow.ALIVE
    z0, phi = z0[keep], b.phi[keep]
    tree = cKDTree(np.column_stack([phi.real, phi.imag]))
    return tree, z0, phi


def _newton(t, omega, z, init, tol, max_iter, integ_tol):
    """Damped Newton from seeds ``z``; returns ``(z, w, ok)``."""

    def forward(zs):
        b = flow.integrate_many(zs, init, t, rtol=integ_tol, atol=integ_tol)
        return b.phi, b.v, b.w, b.status == flow.ALIVE

    phi, v, w, alive = forward(z)
    if not np.all(alive):
        raise ConvergenceError("seed left the disc before time t", z[~alive])
    res = phi - omega
    lam = np.ones(omega.shape)
    ok = np.abs(res) < tol
    for _ in range(max_iter):
        act = np.nonzero(~ok & (lam > 1e-12))[0]
        if act.size == 0:
            break
        cand = z[act] - lam[act] * res[act] / v[act]
        inside = np.abs(cand) < 1
        cand = np.where(inside, cand, z[act])
        cphi, cv, cw, calive = forward(cand)
        cres = cphi - omega[act]
        better = inside & calive & (np.abs(cres) < np.abs(res[act]))
        good = act[better]
        z[good], phi[good], v[good], w[good], res[good] = (
            cand[better], cphi[better], cv[better], cw[better], cres[better])
        lam[good] = np.minimum(1.0, 2 * lam[good])
        lam[act[~better]] *= 0.5
        ok = np.abs(res) < tol
    return z, w, ok


def eta_many(t, omega, init, tol=NEWTON_TOL, max_iter=MAX_NEWTON, integ_tol=flow.DEFAULT_TOL,
             raise_on_failure=True):
    """Vectorized ``eta_t(omega)``.

    Seeds come from the nearest node of :func:`seed_grid`.  Targets that do
    not converge are retried by continuation along their ray: the target
    is first moved to radius ``START_RADIUS`` and then back out, halving
    ``1 - |omega|`` at each stage and reusing the previous preimage.  This
    handles the square-root behaviour of ``phi_t`` near ``x_-(t), x_+(t)``.

    Returns ``(z0, w, ok)``: the preimages, ``H(t, omega)`` from the final
    forward solve, and a convergence mask.  With ``raise_on_failure`` a
    :class:`ConvergenceError` carrying the last iterates is raised instead
    of returning an incomplete mask.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=complex))
    if np.any(np.abs(omega) > 1 - 1e-8):
        raise DomainError("eta needs |omega| <= 1 - 1e-8")
    if t == 0:
        return omega.copy(), init.herglotz0(omega), np.ones(omega.shape, bool)

    tree, zg, _ = seed_grid(init, float(t))
    _, idx = tree.query(np.column_stack([omega.real, omega.imag]))
    z, w, ok = _newton(t, omega, zg[idx].copy(), init, tol, max_iter, integ_tol)

    retry = np.nonzero(~ok & (np.abs(omega) > START_RADIUS))[0]
    if retry.size:
        target = omega[retry]
        unit = target / np.abs(target)
        gap = START_RADIUS_GAP
        stage = unit * (1 - gap)
        _, idx = tree.query(np.column_stack([stage.real, stage.imag]))
        zs, ws, oks = _newton(t, stage, zg[idx].copy(), init, tol, max_iter, integ_tol)
        final_gap = 1 - np.abs(target)
        while np.any(gap > final_gap):
            gap = gap / 2
            stage = unit * (1 - np.maximum(gap, final_gap))
            zs, ws, oks = _newton(t, stage, zs, init, tol, max_iter, integ_tol)
        better = oks
        z[retry[better]], w[retry[better]] = zs[better], ws[better]
        ok[retry[better]] = True
    if raise_on_failure and not np.all(ok):
        raise ConvergenceError(
            f"Newton did not converge for {int((~ok).sum())} target(s)", z[~ok])
    return z, w, ok


def eta(t, omega, init, tol=NEWTON_TOL):
    """``eta_t(omega)`` for a single target."""
    z, _, _ = eta_many(t, np.array([omega]), init, tol)
    return complex(z[0])


def h_eval(t, z, init):
    """``H(t, z)`` at points with ``|z| <= 1 - 1e-8``."""
    z = np.asarray(z, dtype=complex)
    _, w, _ = eta_many(t, z.ravel(), init)
    w = w.reshape(z.shape)
    return complex(w) if w.ndim == 0 else w


def _richardson(values, ratio=2.0):
    """Extrapolate ``values[k] = f(h ratio^-k)`` to ``h = 0``, ``f`` a power series in h."""
    table = np.asarray(values, dtype=float)
    for j in range(1, len(values)):
        table = (ratio ** j * table[1:] - table[:-1]) / (ratio ** j - 1)
    return float(table[0])


def atom_mass(t, theta0, init, epsilon=1e-2, levels=5, floor=1e-9):
    """Mass of ``nu_t`` at ``e^{i theta0}``.

    Richardson extrapolation of ``(1-r)/(1+r) Re H(t, r e^{i theta0})`` over
    ``r = 1 - 2^-k epsilon``.  Values below ``floor`` are reported as 0.
    """
    r = 1 - epsilon * 2.0 ** -np.arange(levels)
    if t == 0:
        h = init.herglotz0(r * np.exp(1j * theta0))
    else:
        h = h_eval(t, r * np.exp(1j * theta0), init)
    m = _richardson((1 - r) / (1 + r) * h.real)
    return 0.0 if m < floor else m


def _poisson(r, dtheta):
    return (1 - r * r) / (1 - 2 * r * np.cos(dtheta) + r * r)


def _clip(values, what, removed=None):
    """Clip roundoff negatives; fail on anything beyond the tolerance.

    Where an atom kernel of size ``removed`` was subtracted, the tolerance
    grows by ``KERNEL_RTOL * removed`` to absorb cancellation.
    """
    tol = CLIP_TOL if removed is None else CLIP_TOL + KERNEL_RTOL * removed
    excess = values + tol
    if values.size and excess.min() < 0:
        worst = float(values[np.argmin(excess)])
        raise NegativeDensityError(f"{what} density reaches {worst!r}")
    return np.maximum(values, 0.0)


def _fill_failures(grid, values, ok):
    failures = grid[~ok].tolist()
    if failures and ok.any():
        values = values.copy()
        values[~ok] = np.interp(grid[~ok], grid[ok], values[ok])
    return values, failures


def nu_density(t, n_theta, epsilon, init, threshold=ATOM_THRESHOLD):
    """Density of ``nu_t`` from ``Re H(t, (1-eps) e^{i theta}) / (2 pi)``.

    Angles where ``eps Re H`` exceeds ``threshold`` at a local maximum, and
    angles where the inversion failed, are probed for atoms: the mass is extracted with :func:`atom_mass` and the
    atom's Poisson kernel is removed from the samples.
    """
    if not 1e-6 <= epsilon <= 1e-2:
        raise DomainError("epsilon must lie in [1e-6, 1e-2]")
    theta = density_grid(n_theta)
    r = 1 - epsilon
    omega = r * np.exp(1j * theta)
    if t == 0:
        h, ok = init.herglotz0(omega), np.ones(theta.shape, bool)
    else:
        _, h, ok = eta_many(t, omega, init, raise_on_failure=False)
    re = h.real
    re, failures = _fill_failures(theta, re, ok)

    scaled = epsilon * re
    peak = (scaled > threshold) & (scaled >= np.roll(scaled, 1)) & (scaled >= np.roll(scaled, -1))
    # a failed sample may hide a peak: probe it directly
    peak |= ~ok
    atoms = []
    removed = np.zeros(theta.shape)
    for th in theta[peak]:
        m = atom_mass(t, th, init)
        if m > 0:
            atoms.append((float(th), m))
            removed += m * _poisson(r, theta - th)
    values = _clip((re - removed) / (2 * np.pi), "nu", removed / (2 * np.pi))
    return DensityProfile(t=t, grid=theta, values=values, atoms=atoms, epsilon=epsilon,
                          kind="nu", threshold=threshold, failures=failures)


def _h_nu(t, init):
    if t == 0:
        return init.herglotz0
    return lambda z: h_eval(t, z, init)


def cauchy_mu(t, zeta, init):
    """``G_mu(zeta) = int d mu_t(x) / (zeta - x)`` for ``zeta`` off ``[0, 1]``."""
    zeta = np.asarray(zeta, dtype=complex)
    h_mu = nu_to_mu_herglotz(_h_nu(t, init), init.params, 1 / zeta)
    return (1 + h_mu) / (2 * zeta)


def mu_atom_mass(t, x0, init, epsilon=1e-2, levels=10, floor=1e-9):
    """Mass of ``mu_t`` at ``x0`` from ``Re[(i s) G_mu(x0 + i s)]``, ``s = 2^-k eps``.

    The density of ``mu_t`` may blow up like ``|x - x0|^(-1/2)`` at the
    edges, so the extrapolation is in powers of ``sqrt(s)``.
    """
    s = epsilon * 2.0 ** -np.arange(levels)
    g = cauchy_mu(t, x0 + 1j * s, init)
    m = _richardson((1j * s * g).real, ratio=np.sqrt(2.0))
    return 0.0 if m < floor else m


def mu_grid(n_x, delta=MU_EDGE):
    """Nodes in ``(delta, 1 - delta)`` clustered toward both ends, with weights.

    ``x(s) = delta + (1 - 2 delta)(1 - cos(pi s)) / 2`` at midpoints ``s``;
    the weights are the midpoint rule in ``s`` times ``x'(s)``.
    """
    s = (np.arange(n_x) + 0.5) / n_x
    x = delta + (1 - 2 * delta) * (1 - np.cos(np.pi * s)) / 2
    w = (1 - 2 * delta) * np.pi * np.sin(np.pi * s) / (2 * n_x)
    return x, w


def _log_panels(lo, hi, per_decade=2, order=8):
    """Gauss-Legendre nodes and weights on ``[lo, hi]`` with geometric panels."""
    n = max(1, int(np.ceil(per_decade * np.log10(hi / lo))))
    edges = np.geomspace(lo, hi, n + 1)
    g, gw = np.polynomial.legendre.leggauss(order)
    mid, half = (edges[1:] + edges[:-1]) / 2, (edges[1:] - edges[:-1]) / 2
    nodes = (mid[:, None] + half[:, None] * g[None, :]).ravel()
    weights = (half[:, None] * gw[None, :]).ravel()
    return nodes, weights


def _continuous_parts(t, x, epsilon, init, atoms):
    """``f(x) = -Im G_c / pi`` and ``F(x) = -Im[zeta G_c] / pi`` at ``zeta = x + i eps``.

    ``G_c`` is the Cauchy transform with the atoms removed.  ``F``
    integrates over the whole line to the first moment of the continuous
    part, with no smoothing bias.
    """
    zeta = x + 1j * epsilon
    g = cauchy_mu(t, zeta, init)
    for x0, m in atoms:
        g = g - m / (zeta - x0)
    return -g.imag / np.pi, -(zeta * g).imag / np.pi


def mu_density(t, n_x, epsilon, init, threshold=ATOM_THRESHOLD, delta=MU_EDGE):
    """Density of ``mu_t`` on (0, 1) by Stieltjes inversion at ``x + i eps``.

    Atoms at 0 and 1 are extracted with :func:`mu_atom_mass` and their
    Cauchy kernels removed from the samples.  The bands ``(0, delta)`` and
    ``(1 - delta, 1)`` and the smoothed tails outside ``[0, 1]`` are
    integrated on side quadratures.  The tails are reported as
    ``complement["leakage"]`` and counted with the nearer edge band.
    """
    if not 1e-6 <= epsilon <= 1e-2:
        raise DomainError("epsilon must lie in [1e-6, 1e-2]")
    if not 0 < delta < 0.5:
        raise DomainError("delta must lie in (0, 1/2)")
    x, wts = mu_grid(n_x, delta)
    atoms = []
    for x0 in (0.0, 1.0):
        m = mu_atom_mass(t, x0, init)
        if m > 0:
            atoms.append((x0, m))
    removed = sum(m * epsilon / (np.pi * ((x - x0) ** 2 + epsilon ** 2)) for x0, m in atoms)

    band_d, band_w = _log_panels(1e-6 * epsilon, delta)
    tail_d, tail_w = _log_panels(1e-6 * epsilon, 1e6)
    side_x = np.concatenate([band_d, 1 - band_d, -tail_d, 1 + tail_d])
    f_all, F_all = _continuous_parts(t, np.concatenate([x, side_x]), epsilon, init, atoms)
    dens, first = f_all[:x.size], F_all[:x.size]
    f_side, F_side = f_all[x.size:], F_all[x.size:]
    nb = band_d.size
    side_w = np.concatenate([band_w, band_w, tail_w, tail_w])
    nt = tail_d.size
    leak_left = float(f_side[2 * nb:2 * nb + nt] @ tail_w)
    leak_right = float(f_side[2 * nb + nt:] @ tail_w)
    # Poisson kernels have unit mass, so the smoothed density integrates
    # over the whole line to the exact continuous mass; each tail is
    # folded back onto the edge it leaked from
    left = float(f_side[:nb] @ band_w) + leak_left
    right = float(f_side[nb:2 * nb] @ band_w) + leak_right
    order = np.argsort(band_d)
    d = band_d[order]
    edge_cdf = (d,) + tuple(
        leak + np.cumsum(c) - c / 2
        for leak, c in ((leak_left, (f_side[:nb] * band_w)[order]),
                        (leak_right, (f_side[nb:2 * nb] * band_w)[order])))
    complement = {
        "edge_mass": left + right,
        "edge_mass_left": left,
        "edge_mass_right": right,
        "leakage": leak_left + leak_right,
        "first_moment": float(F_side @ side_w),
        "delta": delta,
    }
    values = _clip(dens, "mu", removed if atoms else None)
    return DensityProfile(t=t, grid=x, values=values, atoms=atoms, epsilon=epsilon,
                          kind="mu", threshold=threshold, quad_weights=wts,
                          first_moment_samples=first, complement=complement,
                          edge_cdf=edge_cdf)


def nu_moment(t, init, k=1, n=64, radius=0.5):
    """``int xi^k d nu_t`` as a Fourier coefficient of ``H(t, .)`` on ``|z| = radius``.

    ``H(t, z) = 1 + 2 sum_k m_k z^k``; the periodic trapezoid rule is
    spectrally accurate here.
    """
    z = radius * np.exp(2j * np.pi * np.arange(n) / n)
    h = _h_nu(t, init)(z)
    return complex(np.mean(h * z ** -k) / 2)


def mu_moment(t, init, k=1, n=64, radius=0.5):
    """``int x^k d mu_t`` from ``H_mu(w) = 1 + 2 sum_k m_k w^k`` on ``|w| = radius``."""
    w = radius * np.exp(2j * np.pi * np.arange(n) / n)
    h = nu_to_mu_herglotz(_h_nu(t, init), init.params, w)
    return float(np.real(np.mean(h * w ** -k) / 2))
