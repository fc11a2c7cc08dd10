"""Probability measures on the unit circle and initial data presets."""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .transforms import TraceParams, h_infinity, h_infinity_deriv

__all__ = [
    "CircleMeasure", "InitialData", "validate", "herglotz", "herglotz_deriv",
    "first_moment", "dirac", "haar", "preset", "load_custom", "PRESETS",
]

MASS_TOL = 1e-9
DEFAULT_GRID = 2048


def density_grid(n):
    """Uniform grid on (-pi, pi]: ``theta_j = -pi + 2 pi (j+1) / n``."""
    return -np.pi + 2.0 * np.pi * (np.arange(n) + 1) / n


@dataclass(frozen=True, eq=False)
class CircleMeasure:
    """Atoms ``(theta, mass)`` plus an optional density ``d nu / d theta``.

    The density is sampled on :func:`density_grid` and integrated with the
    periodic trapezoid rule.  Atoms are kept apart from the density so that
    Herglotz evaluations treat them exactly.
    """

    atoms: tuple = ()
    density: Optional[np.ndarray] = None

    def __post_init__(self):
        atoms = tuple((float(th), float(m)) for th, m in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.density is not None:
            d = np.array(self.density, dtype=float)
            d.setflags(write=False)
            object.__setattr__(self, "density", d)

    @property
    def grid(self):
        if self.density is None:
            return np.empty(0)
        return density_grid(self.density.size)

    @property
    def atom_mass(self):
        return sum(m for _, m in self.atoms)

    @property
    def density_mass(self):
        if self.density is None:
            return 0.0
        return float(self.density.sum() * 2.0 * np.pi / self.density.size)

    def to_dict(self):
        out = {"atoms": [{"theta": th, "mass": m} for th, m in self.atoms]}
        if self.density is not None:
            out["density"] = {"n": int(self.density.size),
                              "values": self.density.tolist()}
        return out


def _wrap(theta):
    """Map an angle into (-pi, pi]."""
    w = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w <= -np.pi, w + 2.0 * np.pi, w)


def validate(m):
    """List the violated measure invariants (empty when ``m`` is valid)."""
    problems = []
    if any(mass < 0 for _, mass in m.atoms):
        problems.append("negative atom mass")
    if m.density is not None and np.any(m.density < 0):
        problems.append("negative density sample")
    total = m.atom_mass + m.density_mass
    if abs(total - 1.0) > MASS_TOL:
        problems.append(f"total mass {total!r} != 1")

    # conjugation symmetry: atom at theta needs a partner at -theta
    remaining = [(float(_wrap(th)), mass) for th, mass in m.atoms]
    asym = False
    while remaining:
        th, mass = remaining.pop()
        if abs(th) < 1e-12 or abs(abs(th) - np.pi) < 1e-12:
            continue
        for i, (th2, m2) in enumerate(remaining):
            if abs(th2 + th) < 1e-12 and abs(m2 - mass) < MASS_TOL:
                remaining.pop(i)
                break
        else:
            asym = True
    if asym:
        problems.append("atoms not symmetric under theta -> -theta")
    if m.density is not None:
        n = m.density.size
        mirror = m.density[(n - 2 - np.arange(n)) % n]
        scale = max(1.0, float(np.max(np.abs(m.density))))
        if np.max(np.abs(mirror - m.density)) > 1e-9 * scale:
            problems.append("density not symmetric under theta -> -theta")
    return problems


def _check_disc(z):
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("Herglotz transform needs |z| < 1")
    return z


def _integrate_kernel(m, z, kernel):
    out = np.zeros(z.shape, dtype=complex)
    for th, mass in m.atoms:
        if mass:
            out += mass * kernel(np.exp(1j * th), z)
    if m.density is not None:
        xi = np.exp(1j * m.grid)
        wts = m.density * (2.0 * np.pi / m.density.size)
        flat = z.ravel()
        res = np.empty(flat.shape, dtype=complex)
        step = max(1, 2 ** 22 // max(1, xi.size))
        for i in range(0, flat.size, step):
            zc = flat[i:i + step, None]
            res[i:i + step] = kernel(xi[None, :], zc) @ wts
        out += res.reshape(z.shape)
    return out


def herglotz(m, z):
    """``H(z) = int (xi + z)/(xi - z) d m(xi)`` for ``|z| < 1``."""
    z = _check_disc(z)
    return _integrate_kernel(m, z, lambda xi, zz: (xi + zz) / (xi - zz))


def herglotz_deriv(m, z):
    """``dH/dz = int 2 xi / (xi - z)^2 d m(xi)``."""
    z = _check_disc(z)
    return _integrate_kernel(m, z, lambda xi, zz: 2.0 * xi / (xi - zz) ** 2)


def first_moment(m):
    """``int xi d m(xi)``."""
    out = sum(mass * np.exp(1j * th) for th, mass in m.atoms)
    if m.density is not None:
        out += np.sum(m.density * np.exp(1j * m.grid)) * 2.0 * np.pi / m.density.size
    return complex(out)


def dirac(theta=0.0):
    return CircleMeasure(atoms=((theta, 1.0),))


def haar(n=DEFAULT_GRID):
    return CircleMeasure(density=np.full(n, 1.0 / (2.0 * np.pi)))


@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial Herglotz transform ``H(0, .)`` together with the traces."""

    name: str
    params: TraceParams
    herglotz0: Callable
    herglotz0_deriv: Callable
    measure0: Optional[CircleMeasure] = None
    options: dict = field(default_factory=dict)

    def check(self, n_sample=200, seed=0):
        """Verify ``H(0,0) = 1`` and positivity on random disc points."""
        problems = []
        h00 = complex(self.herglotz0(np.array([0j]))[0])
        if abs(h00 - 1) > 1e-12:
            problems.append(f"H(0,0) = {h00!r} != 1")
        rng = np.random.default_rng(seed)
        z = np.sqrt(rng.uniform(0, 0.98, n_sample)) * np.exp(1j * rng.uniform(-np.pi, np.pi, n_sample))
        if np.any(self.herglotz0(z).real <= 0):
            problems.append("Re H(0, z) <= 0 somewhere in the disc")
        return problems

    def describe(self):
        out = {"name": self.name, **self.params.as_dict(), **self.options}
        if self.measure0 is not None and self.name == "custom":
            out["measure0"] = self.measure0.to_dict()
        return out


def _delta1_herglotz(z):
    z = np.asarray(z, dtype=complex)
    return (1 + z) / (1 - z)


def _delta1_herglotz_deriv(z):
    z = np.asarray(z, dtype=complex)
    return 2.0 / (1 - z) ** 2


def _measure_backed(name, measure, params, **options):
    problems = validate(measure)
    if problems:
        raise DomainError("invalid measure: " + "; ".join(problems))
    return InitialData(
        name=name, params=params,
        herglotz0=lambda z: herglotz(measure, z),
        herglotz0_deriv=lambda z: herglotz_deriv(measure, z),
        measure0=measure, options=options,
    )


PRESETS = ("equal", "free", "custom", "haar")


def preset(name, alpha=None, beta=None, measure=None, grid=DEFAULT_GRID):
    """Build :class:`InitialData`.

    equal
        ``P = Q``: ``alpha = beta`` (pass ``alpha`` only), ``nu_0 = delta_1``.
    free
        The freely independent state, ``H(0, .) = H_inf``; no measure.
    custom
        A user supplied :class:`CircleMeasure` with traces ``(alpha, beta)``.
        Only the measure axioms are checked, not realizability.
    haar
        Uniform ``nu_0`` with ``H(0, .) = 1``; ``alpha``, ``beta`` default to 0.
    """
    if name == "equal":
        if alpha is None:
            raise DomainError("equal preset needs alpha")
        if beta is not None and beta != alpha:
            raise DomainError("equal preset needs alpha == beta")
        params = TraceParams(alpha, alpha)
        return InitialData("equal", params, _delta1_herglotz, _delta1_herglotz_deriv,
                           measure0=dirac(0.0))
    if name == "free":
        params = TraceParams(0.0 if alpha is None else alpha, 0.0 if beta is None else beta)
        return InitialData("free", params,
                           lambda z: h_infinity(z, params),
                           lambda z: h_infinity_deriv(z, params))
    if name == "custom":
        if measure is None or alpha is None or beta is None:
            raise DomainError("custom preset needs a measure, alpha and beta")
        return _measure_backed("custom", measure, TraceParams(alpha, beta))
    if name == "haar":
        params = TraceParams(0.0 if alpha is None else alpha, 0.0 if beta is None else beta)
        # H = 1 exactly; a quadrature of the uniform density would look like
        # a comb of atoms close to the circle
        return InitialData("haar", params,
                           lambda z: np.ones(np.shape(z), dtype=complex),
                           lambda z: np.zeros(np.shape(z), dtype=complex),
                           measure0=haar(grid))
    raise DomainError(f"unknown preset {name!r}; expected one of {PRESETS}")


def load_custom(source):
    """Read a custom measure document.

    ``source`` is a path or an already parsed dict with keys ``atoms``,
    ``density`` (optional, ``{"n": int, "values": [...]}``), ``alpha``, ``beta``.
    Returns ``(measure, alpha, beta)``.
    """
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = source
    try:
        atoms = tuple((a["theta"], a["mass"]) for a in doc.get("atoms", []))
        density = None
        if doc.get("density") is not None:
            values = doc["density"]["values"]
            if int(doc["density"].get("n", len(values))) != len(values):
                raise DomainError("density.n does not match len(density.values)")
            density = np.asarray(values, dtype=float)
        alpha, beta = float(doc["alpha"]), float(doc["beta"])
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed custom measure document: {exc}") from exc
    return CircleMeasure(atoms=atoms, density=density), alpha, beta
