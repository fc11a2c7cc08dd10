"""Random-matrix model of the liberation process.

``U_t`` is built from independent increments ``exp(i sqrt(dt) G)`` with ``G``
a GUE matrix normalized to ``E|G_ij|^2 = 1/N``, so that ``tr U_t -> e^{-t/2}``.
Each increment is sampled as ``V diag(exp(i sqrt(dt) lambda)) V*`` with ``V``
Haar unitary and ``lambda`` the GUE spectrum from the Dumitriu-Edelman
tridiagonal model; this has the same law and costs one QR factorization.
The phase fix that makes the QR factor Haar commutes with the diagonal
and cancels, so the increment is applied straight from the Householder
form.  Only ``U_t`` times a basis of ran Q is propagated, which is all
``U_t Q U_t*`` needs; the increments are applied on the left, giving the
reversed product, which has the same law.

Trials draw independent streams from ``SeedSequence(seed).spawn(trials)``,
so results do not depend on how trials are scheduled.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal, get_lapack_funcs, qr

from .errors import DomainError
from .measures import CircleMeasure

__all__ = [
    "MatrixModelSpec", "MCSample", "haar_unitary", "gue_eigenvalues",
    "sample_unitary_bm", "projections", "simulate", "sample_eigenphases",
    "sample_pq_spectrum", "ks_distance", "compare", "wrap_angles",
]

MAX_SUBSTEP = 0.01
# exact eigenvalues 0, 1 (spectrum of PUQU*P) and +-1 (of RUSU*) are snapped
SNAP = 1e-8
COUPLINGS = ("equal", "haar-free", "principal-angles")


@dataclass(frozen=True)
class MatrixModelSpec:
    N: int
    p: float
    q: float
    t: float
    coupling: str = "haar-free"
    angles: tuple = ()
    steps: int = None
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.steps is None:
            object.__setattr__(self, "steps", max(1, math.ceil(self.t / MAX_SUBSTEP - 1e-9)))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        self.validate()

    def validate(self):
        if not (isinstance(self.N, (int, np.integer)) and 2 <= self.N <= 2048):
            raise DomainError("N must be an integer in [2, 2048]")
        if not (0 <= self.p <= 1 and 0 <= self.q <= 1):
            raise DomainError("p and q must lie in [0, 1]")
        if self.t < 0:
            raise DomainError("t must be non-negative")
        if self.coupling not in COUPLINGS:
            raise DomainError(f"coupling must be one of {COUPLINGS}")
        if self.coupling == "equal" and self.rank_p != self.rank_q:
            raise DomainError("equal coupling needs round(pN) == round(qN)")
        if self.coupling == "principal-angles" and not self.angles:
            raise DomainError("principal-angles coupling needs at least one angle")
        if self.t > 0 and self.t / self.steps > MAX_SUBSTEP + 1e-12:
            raise DomainError(f"substep t/steps exceeds {MAX_SUBSTEP}")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")

    @property
    def rank_p(self):
        return int(round(self.p * self.N))

    @property
    def rank_q(self):
        return int(round(self.q * self.N))

    @property
    def realized_alpha(self):
        return 2 * self.rank_p / self.N - 1

    @property
    def realized_beta(self):
        return 2 * self.rank_q / self.N - 1

    @property
    def substep(self):
        return self.t / self.steps

    def to_dict(self):
        out = asdict(self)
        out["angles"] = list(self.angles)
        out.update(rank_p=self.rank_p, rank_q=self.rank_q,
                   realized_alpha=self.realized_alpha, realized_beta=self.realized_beta)
        return out


@dataclass
class MCSample:
    """Pooled samples with the trial index of each value."""

    values: np.ndarray
    trial: np.ndarray
    spec: MatrixModelSpec
    extras: dict = field(default_factory=dict)

    def per_trial(self):
        return [self.values[self.trial == k] for k in range(self.spec.trials)]


def haar_unitary(n, rng):
    """Haar unitary via QR of a complex Gaussian matrix with phase correction."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def gue_eigenvalues(n, rng):
    """Spectrum of a GUE matrix with ``E|G_ij|^2 = 1/n`` (semicircle on [-2, 2])."""
    diag = rng.standard_normal(n)
    off = np.sqrt(rng.chisquare(2 * np.arange(n - 1, 0, -1))) / np.sqrt(2)
    return eigvalsh_tridiagonal(diag, off) / np.sqrt(n)


def _bm_apply(x, t, steps, rng):
    """``U_t x`` for a fresh draw of ``U_t``; ``x`` is ``N x k``."""
    x = np.array(x, dtype=complex, order="F")
    if t == 0:
        return x
    n = x.shape[0]
    h = np.sqrt(t / steps)
    unmqr = get_lapack_funcs("unmqr", (x,))
    lwork = None
    for _ in range(steps):
        z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
        lam = gue_eigenvalues(n, rng)
        (a, tau), _ = qr(z, mode="raw", overwrite_a=True, check_finite=False)
        if lwork is None:
            lwork = int(unmqr("L", "C", a, tau, x, -1)[1][0].real)
        x = unmqr("L", "C", a, tau, x, lwork, overwrite_c=1)[0]
        x *= np.exp(1j * h * lam)[:, None]
        x = unmqr("L", "N", a, tau, x, lwork, overwrite_c=1)[0]
    return x


def sample_unitary_bm(spec, rng=None):
    """One draw of ``U_t`` (``rng`` defaults to the first trial's stream)."""
    if rng is None:
        rng = _trial_rngs(spec)[0]
    return _bm_apply(np.eye(spec.N), spec.t, spec.steps, rng)


def projections(spec, rng):
    """Diagonal of ``P`` and an orthonormal basis (``N x rank Q``) of ran Q."""
    n, kp, kq = spec.N, spec.rank_p, spec.rank_q
    pdiag = np.zeros(n)
    pdiag[:kp] = 1
    if spec.coupling == "equal":
        return pdiag, np.eye(n, kp, dtype=complex)
    if spec.coupling == "haar-free":
        return pdiag, haar_unitary(n, rng)[:, :kq]
    return pdiag, _principal_angle_basis(spec)


def _principal_angle_basis(spec):
    """Basis of ran Q from 2x2 blocks pairing ``e_i`` (in ran P) with ``e_{kp+i}``.

    Block ``i`` contributes ``cos(phi) e_i + sin(phi) e_{kp+i}``, giving
    ``RS`` the eigenvalues ``e^{+-2 i phi}``; ``phi`` cycles through
    ``spec.angles``.  Leftover rank of ``Q`` fills unpaired coordinates of
    ran P first, then of ker P.
    """
    n, kp, kq = spec.N, spec.rank_p, spec.rank_q
    blocks = min(kp, n - kp, kq, n - kq)
    basis = np.zeros((n, kq), dtype=complex)
    for i in range(blocks):
        phi = spec.angles[i % len(spec.angles)]
        basis[i, i], basis[kp + i, i] = np.cos(phi), np.sin(phi)
    free = list(range(blocks, kp)) + list(range(kp + blocks, n))
    for col, j in enumerate(free[:kq - blocks], start=blocks):
        basis[j, col] = 1
    return basis


def initial_measure(spec):
    """Realized spectral law of ``R S`` at ``t = 0`` for the principal-angles coupling."""
    if spec.coupling != "principal-angles":
        raise DomainError("only defined for the principal-angles coupling")
    n, kp, kq = spec.N, spec.rank_p, spec.rank_q
    blocks = min(kp, n - kp, kq, n - kq)
    atoms = {}
    for i in range(blocks):
        phi = spec.angles[i % len(spec.angles)]
        for th in (2 * phi, -2 * phi):
            th = float(wrap_angles(np.array([th]))[0])
            atoms[th] = atoms.get(th, 0) + 1 / n
    rest = kq - blocks
    in_p = min(rest, kp - blocks)
    # R = 1 on ran P; S = 1 on Q's diagonal ones
    ones = in_p + max(0, (n - kp - blocks) - (rest - in_p))
    minus = n - 2 * blocks - ones
    if ones:
        atoms[0.0] = atoms.get(0.0, 0) + ones / n
    if minus:
        atoms[float(np.pi)] = atoms.get(float(np.pi), 0) + minus / n
    return CircleMeasure(atoms=tuple(sorted(atoms.items())))


def wrap_angles(theta, atoms=(0.0, np.pi), snap=1e-8):
    """Map angles into (-pi, pi] and snap values within ``snap`` of ``atoms``."""
    th = np.mod(np.asarray(theta, float) + np.pi, 2 * np.pi) - np.pi
    th = np.where(th <= -np.pi + snap, np.pi, th)
    for a in atoms:
        th = np.where(np.abs(th - a) < snap, a, th)
    return th


def _trial_rngs(spec):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(spec.trials)]


def _one_trial(args):
    spec, k, seq = args
    rng = np.random.default_rng(seq)
    pdiag, basis = projections(spec, rng)
    rank_q = basis.shape[1]
    # with Q = 0 one column is still propagated for the trace estimate
    probe = basis if rank_q else np.eye(spec.N, 1, dtype=complex)
    ub = _bm_apply(probe, spec.t, spec.steps, rng)
    # tr(Q U_t) / rank Q has the mean of tr U_t / N because the law of U_t is
    # invariant under conjugation and independent of Q
    trace = complex(np.trace(probe.conj().T @ ub) / probe.shape[1])
    ub = ub[:, :rank_q]
    quq = ub @ ub.conj().T
    S_t = 2 * quq - np.eye(spec.N)
    rs = (2 * pdiag - 1)[:, None] * S_t
    phases = wrap_angles(np.angle(np.linalg.eigvals(rs)), snap=SNAP)
    kp = spec.rank_p
    block = quq[:kp, :kp]
    pq = np.concatenate([np.linalg.eigvalsh((block + block.conj().T) / 2),
                         np.zeros(spec.N - kp)])
    pq = np.where(np.abs(pq) < SNAP, 0.0, np.where(np.abs(pq - 1) < SNAP, 1.0, pq))
    return k, phases, pq, trace


def simulate(spec, workers=1):
    """Run all trials.

    Returns ``(phases, pq, traces)``: two :class:`MCSample` s and one
    estimate of ``tr U_t / N`` per trial, namely ``tr(Q U_t) / rank Q``.
    """
    seqs = np.random.SeedSequence(spec.seed).spawn(spec.trials)
    jobs = [(spec, k, seqs[k]) for k in range(spec.trials)]
    if workers > 1 and spec.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one_trial, jobs))
    else:
        results = [_one_trial(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    trial = np.concatenate([np.full(spec.N, k) for k, *_ in results])
    phases = MCSample(np.concatenate([r[1] for r in results]), trial, spec)
    pq = MCSample(np.concatenate([r[2] for r in results]), trial, spec)
    traces = np.array([r[3] for r in results])
    phases.extras["trace_u"] = traces
    pq.extras["trace_u"] = traces
    return phases, pq, traces


def sample_eigenphases(spec, workers=1):
    """Eigenvalue arguments of ``R U_t S U_t*``, pooled over trials."""
    return simulate(spec, workers)[0]


def sample_pq_spectrum(spec, workers=1):
    """Spectrum of ``P U_t Q U_t* P`` on ran P, padded with zeros to length N."""
    return simulate(spec, workers)[1]


def ks_distance(samples, cdf, cdf_left=None):
    """``sup |F_emp - F|`` checking both one-sided limits at each jump."""
    x = np.sort(np.asarray(samples, float))
    if x.size == 0:
        raise DomainError("empty sample")
    uniq, last = np.unique(x, return_index=False, return_counts=True)
    below = np.cumsum(last)
    right_emp = below / x.size
    left_emp = (below - last) / x.size
    right = cdf(uniq)
    left = cdf_left(uniq) if cdf_left is not None else right
    return float(max(np.max(np.abs(right_emp - right)), np.max(np.abs(left_emp - left))))


def _fd_edges(x, lo, hi):
    edges = np.histogram_bin_edges(x, bins="fd", range=(lo, hi))
    if edges.size < 3:
        edges = np.histogram_bin_edges(x, bins="sturges", range=(lo, hi))
    return edges


def compare(empirical, analytic):
    """KS and L1 distances between samples and a :class:`DensityProfile`.

    Atoms of the profile are jumps of its distribution function.  ``l1`` is
    ``sum |empirical bin mass - analytic bin mass|`` over Freedman-Diaconis
    bins, i.e. the L1 distance between the histogram and the bin-averaged
    analytic law.
    """
    x = np.asarray(getattr(empirical, "values", empirical), float)
    if x.size == 0:
        raise DomainError("empty sample")
    ks = ks_distance(x, lambda s: analytic.cdf(s), lambda s: analytic.cdf(s, side="left"))
    lo, hi = (-np.pi, np.pi) if analytic.kind == "nu" else (0.0, 1.0)
    edges = _fd_edges(x, lo, hi)
    counts, _ = np.histogram(x, bins=edges)
    emp = counts / x.size
    # bins are [e_k, e_k+1) except the closed last one
    cdf_edges = analytic.cdf(edges, side="left")
    cdf_edges[-1] = analytic.cdf(edges[-1:])[0]
    an = np.diff(cdf_edges)
    out = {"ks": ks, "l1": float(np.abs(emp - an).sum()), "n_samples": int(x.size),
           "bins": int(edges.size - 1)}
    spec = getattr(empirical, "spec", None)
    if spec is not None:
        out.update(realized_alpha=spec.realized_alpha, realized_beta=spec.realized_beta)
    return out
