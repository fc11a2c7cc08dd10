import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liberation.errors import BranchError, DomainError, PoleError
from liberation.transforms import (TraceParams, disc_root, h_infinity, h_infinity_deriv,
                                   k_eval, k_infinity_constant, mu_to_nu_herglotz,
                                   nu_to_mu_herglotz, phi_weight, phi_weight_deriv)

traces = st.floats(-1, 1, allow_nan=False)
radii = st.floats(0, 0.9)
angles = st.floats(-np.pi, np.pi)


def test_params_derived():
    p = TraceParams(0.2, 0.6)
    assert p.a == pytest.approx(0.2)
    assert p.b == pytest.approx(0.4)
    q = TraceParams.from_projections(0.6, 0.7)
    assert (q.alpha, q.beta) == pytest.approx((0.2, 0.4))
    with pytest.raises(DomainError):
        TraceParams(1.5, 0)


def test_h_infinity_examples():
    assert h_infinity(0.0, TraceParams(0.3, -0.7)) == pytest.approx(1)
    z = np.array([0.3, -0.5j, 0.2 + 0.4j])
    np.testing.assert_allclose(h_infinity(z, TraceParams(0, 0)), 1)
    assert h_infinity(0.3, TraceParams(1, 1)) == pytest.approx(1.857142857, abs=1e-9)


def test_h_infinity_principal_branch_positive():
    rng = np.random.default_rng(0)
    z = 0.95 * np.sqrt(rng.uniform(size=300)) * np.exp(1j * rng.uniform(-np.pi, np.pi, 300))
    for alpha, beta in rng.uniform(-1, 1, (10, 2)):
        assert np.all(h_infinity(z, TraceParams(alpha, beta)).real > 0)


def test_h_infinity_deriv_complex_step():
    p = TraceParams(0.2, 0.6)
    z, h = 0.3 + 0.2j, 1e-7
    fd = (h_infinity(z + h, p) - h_infinity(z - h, p)) / (2 * h)
    assert abs(h_infinity_deriv(z, p) - fd) < 1e-7


def test_phi_weight_examples():
    p = TraceParams(0.2, 0.6)
    assert phi_weight(0.0, p) == pytest.approx(p.a + p.b)
    assert phi_weight(0.4j, TraceParams(0.3, -0.3 + 0.6)) != 0
    np.testing.assert_allclose(phi_weight(np.array([0.1, 0.5j]), TraceParams(0, 0)), 0)
    # a = 0, b = 1
    assert phi_weight(0.5, TraceParams(1, 1)) == pytest.approx(3)
    with pytest.raises(PoleError):
        phi_weight(1.0, TraceParams(1, 1))
    # no pole at -1 when a = 0
    assert np.isfinite(phi_weight(-1.0, TraceParams(0.5, 0.5)))


def test_phi_weight_deriv():
    p = TraceParams(0.2, 0.6)
    z, h = 0.3 + 0.2j, 1e-7
    fd = (phi_weight(z + h, p) - phi_weight(z - h, p)) / (2 * h)
    assert abs(phi_weight_deriv(z, p) - fd) < 1e-7


def test_k_eval_examples():
    p = TraceParams(0.2, 0.6)
    assert k_eval(1.0, 0.0, p) == pytest.approx(np.sqrt(1 - (p.a + p.b) ** 2))
    assert k_eval(0.7 + 0.1j, 0.3j, TraceParams(0, 0)) == pytest.approx(0.7 + 0.1j)
    alpha = 0.5
    pe = TraceParams(alpha, alpha)
    z = 0.4
    expect = np.sqrt(1 - pe.b ** 2) * 1.4 / 0.6
    assert k_eval((1 + z) / (1 - z), z, pe) == pytest.approx(expect)


def test_k_eval_reference_sign():
    p = TraceParams(0.2, 0.6)
    k = k_eval(1.0, 0.1, p)
    assert k_eval(1.0, 0.1, p, ref=-k) == pytest.approx(-k)


@settings(max_examples=40, deadline=None)
@given(traces, traces, radii, angles)
def test_constant_identity_property(alpha, beta, r, th):
    p = TraceParams(alpha, beta)
    z = r * np.exp(1j * th)
    lhs = h_infinity(z, p) ** 2 - phi_weight(z, p) ** 2
    assert abs(lhs - k_infinity_constant(p)) < 1e-10


def test_k_infinity_constant_grids():
    assert k_infinity_constant(TraceParams(0, 0)) == 1
    z = 0.9 * np.exp(2j * np.pi * np.arange(100) / 100) * np.linspace(0.1, 1, 100)
    for alpha, beta in ((0.3, 0.3), (0.3, -0.3)):
        p = TraceParams(alpha, beta)
        res = h_infinity(z, p) ** 2 - phi_weight(z, p) ** 2 - (1 - alpha ** 2)
        assert np.abs(res).max() < 1e-12


def test_disc_root():
    w = np.array([0.3, -2.0, 0.5 + 0.5j, 5 + 1j])
    z = disc_root(w)
    assert np.all(np.abs(z) < 1)
    np.testing.assert_allclose(4 * z / (1 + z) ** 2, w, atol=1e-12)
    with pytest.raises(BranchError):
        disc_root(2.0)


def test_mu_nu_equal_preset_roundtrip():
    # P = Q with tau(P) = p: mu_0 = (1-p) delta_0 + p delta_1
    for p in (0.5, 0.3):
        alpha = 2 * p - 1
        tp = TraceParams(alpha, alpha)
        h_mu = lambda w: 1 + 2 * p * w / (1 - w)
        z = np.array([0.0, 0.3, -0.4 + 0.2j, 0.6j])
        np.testing.assert_allclose(mu_to_nu_herglotz(h_mu, tp, z), (1 + z) / (1 - z),
                                   atol=1e-12)
        w = np.array([0.0, 0.2, -1.5, 0.4 + 0.3j])
        back = nu_to_mu_herglotz(lambda zz: (1 + zz) / (1 - zz), tp, w)
        np.testing.assert_allclose(back, h_mu(w), atol=1e-12)
    assert nu_to_mu_herglotz(lambda zz: (1 + zz) / (1 - zz), TraceParams(0, 0), 0.0) == 1
