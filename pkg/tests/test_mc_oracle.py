import numpy as np
import pytest

from liberation import inversion, mc_oracle, measures
from liberation.errors import DomainError
from liberation.mc_oracle import MatrixModelSpec


def test_spec_invariants():
    s = MatrixModelSpec(N=100, p=0.333, q=0.7, t=0.5)
    assert (s.rank_p, s.rank_q) == (33, 70)
    assert s.substep <= 0.01 and s.steps * s.substep == pytest.approx(0.5)
    assert s.realized_alpha == pytest.approx(-0.34)
    with pytest.raises(DomainError):
        MatrixModelSpec(N=100, p=0.3, q=0.7, t=0.5, coupling="equal")
    with pytest.raises(DomainError):
        MatrixModelSpec(N=100, p=0.3, q=0.3, t=0.5, steps=10)
    with pytest.raises(DomainError):
        MatrixModelSpec(N=100, p=1.3, q=0.3, t=0.5)
    with pytest.raises(DomainError):
        MatrixModelSpec(N=100, p=0.3, q=0.3, t=0.5, coupling="principal-angles")


def test_identity_at_zero():
    s = MatrixModelSpec(N=32, p=0.5, q=0.5, t=0.0)
    assert np.array_equal(mc_oracle.sample_unitary_bm(s), np.eye(32))


def test_unitary():
    u = mc_oracle.sample_unitary_bm(MatrixModelSpec(N=64, p=0.5, q=0.5, t=0.3, seed=3))
    assert np.max(np.abs(u.conj().T @ u - np.eye(64))) < 1e-10


def test_deterministic():
    s = MatrixModelSpec(N=32, p=0.5, q=0.25, t=0.2, trials=3, seed=11)
    a = mc_oracle.simulate(s)
    b = mc_oracle.simulate(s)
    assert np.array_equal(a[0].values, b[0].values)
    assert np.array_equal(a[1].values, b[1].values)
    c = mc_oracle.simulate(MatrixModelSpec(N=32, p=0.5, q=0.25, t=0.2, trials=3, seed=12))
    assert not np.array_equal(a[0].values, c[0].values)


def test_workers_do_not_change_samples():
    s = MatrixModelSpec(N=24, p=0.5, q=0.5, t=0.1, trials=2, seed=5)
    assert np.array_equal(mc_oracle.simulate(s)[0].values, mc_oracle.simulate(s, workers=2)[0].values)


def test_equal_at_zero():
    s = MatrixModelSpec(N=40, p=0.3, q=0.3, t=0.0, coupling="equal", trials=2)
    ph = mc_oracle.sample_eigenphases(s)
    assert np.all(ph.values == 0)
    pq = np.sort(mc_oracle.sample_pq_spectrum(s).per_trial()[0])
    assert np.array_equal(pq, np.r_[np.zeros(28), np.ones(12)])


def test_pq_range_and_symmetry():
    s = MatrixModelSpec(N=128, p=0.6, q=0.7, t=0.5, trials=4, seed=1)
    ph, pq, _ = mc_oracle.simulate(s)
    assert pq.values.min() >= -1e-10 and pq.values.max() <= 1 + 1e-10
    assert len(pq.values) == 4 * 128
    # the conjugate of an eigenvalue of R U S U* is again one
    x = ph.values[(ph.values != 0) & (ph.values != np.pi)]
    assert abs(np.mean(np.sin(x))) < 3 * np.std(np.sin(x)) / np.sqrt(x.size) + 1e-12


def test_trace_decay_small():
    s = MatrixModelSpec(N=128, p=0.5, q=0.5, t=0.5, trials=20, seed=4)
    _, _, tr = mc_oracle.simulate(s)
    se = np.std(tr.real, ddof=1) / np.sqrt(tr.size)
    assert abs(tr.real.mean() - np.exp(-0.25)) < 3 * se + 1 / 128


def test_principal_angles_initial_measure():
    s = MatrixModelSpec(N=20, p=0.5, q=0.5, t=0.0, coupling="principal-angles", angles=(0.3,))
    m = mc_oracle.initial_measure(s)
    assert measures.validate(m) == []
    ph = mc_oracle.sample_eigenphases(s).values
    np.testing.assert_allclose(np.sort(ph), np.sort(np.repeat([-0.6, 0.6], 10)), atol=1e-10)


def test_ks_self_zero():
    x = np.random.default_rng(0).normal(size=200)
    xs = np.sort(x)
    ecdf = lambda s: np.searchsorted(xs, s, side="right") / xs.size
    ecdf_left = lambda s: np.searchsorted(xs, s, side="left") / xs.size
    assert mc_oracle.ks_distance(x, ecdf, ecdf_left) == 0.0
    with pytest.raises(DomainError):
        mc_oracle.ks_distance([], ecdf)


def test_compare_atoms_at_zero():
    init = measures.preset("equal", alpha=0.0)
    prof = inversion.nu_density(0.0, 256, 1e-3, init)
    rep = mc_oracle.compare(np.zeros(100), prof)
    assert rep["ks"] < 1e-6
    with pytest.raises(DomainError):
        mc_oracle.compare(np.array([]), prof)


def test_wrap_angles():
    th = mc_oracle.wrap_angles(np.array([-np.pi, 3 * np.pi, 1e-12, 0.5]))
    np.testing.assert_allclose(th, [np.pi, np.pi, 0.0, 0.5])
