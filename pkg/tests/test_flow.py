import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liberation import closedform, flow, measures
from liberation.errors import DomainError
from liberation.flow import FlowState, flow_rhs, forcing, forcing_deriv, forcing_poly
from liberation.transforms import TraceParams, h_infinity


def test_rhs_at_origin():
    p = TraceParams(0.2, 0.6)
    dphi, dw, dv, du = flow_rhs(FlowState(0.0, 0j, 1 + 0j, 1 + 0j, 0.7 + 0j), p)
    assert dphi == 0 and dw == 0
    assert dv == 1


def test_forcing_vanishes_without_traces():
    z = np.array([0.3, -0.2 + 0.5j])
    np.testing.assert_allclose(forcing(z, TraceParams(0, 0)), 0)


def test_forcing_deriv_difference_quotients():
    p = TraceParams(0.2, 0.6)
    x = 0.3 + 0.2j
    # holomorphic: real and imaginary increments give the same quotient
    hs = 1e-6
    fd = (forcing(x + hs, p) - forcing(x - hs, p)) / (2 * hs)
    fd2 = (forcing(x + 1j * hs, p) - forcing(x - 1j * hs, p)) / (2j * hs)
    d = forcing_deriv(x, p)
    assert abs(d - fd) / abs(d) < 1e-9 and abs(d - fd2) / abs(d) < 1e-9


def test_forcing_deriv_against_series():
    """Cauchy integral of the forcing around x gives G' to spectral accuracy."""
    p = TraceParams(0.2, 0.6)
    x = 0.3 + 0.2j
    rad, n = 0.05, 64
    s = rad * np.exp(2j * np.pi * np.arange(n) / n)
    d_cauchy = np.mean(forcing(x + s, p) / s)
    assert abs(forcing_deriv(x, p) - d_cauchy) / abs(d_cauchy) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 0.9), st.floats(-np.pi, np.pi))
def test_forcing_forms_agree(alpha, beta, r, th):
    p = TraceParams(alpha, beta)
    x = r * np.exp(1j * th)
    a, b = forcing(x, p), forcing_poly(x, p)
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_origin_fixed_point(free_ab):
    tr = flow.integrate(0j, free_ab, 2.0)
    assert np.all(tr.phi == 0)
    np.testing.assert_allclose(tr.w, 1)
    assert flow.residual_char_eq(tr, free_ab) == 0
    assert flow.residual_exp_form(tr) == 0


def test_free_stationarity(free_ab):
    for z in (0.3 + 0.2j, -0.5j, 0.4):
        tr = flow.integrate(z, free_ab, 2.0)
        inside = np.abs(tr.phi) < 1 - 1e-3
        gap = np.abs(tr.w[inside] - h_infinity(tr.phi[inside], free_ab.params))
        assert gap.max() < 1e-6


def test_equal_zero_matches_closed_form(equal0):
    b = flow.integrate_many(np.array([0.5 + 0j]), equal0, 0.5)
    assert abs(b.phi[0].real - closedform.phi_real(0.5, 0.5, equal0)) < 1e-6


def test_equal_zero_continued_flow_matches_formula(equal0):
    # G = 0, so phi = z exp(t (1+z)/(1-z)) even after it leaves the disc
    b = flow.integrate_many(np.array([0.5 + 0j]), equal0, 0.5, stop_at_exit=False)
    exact = 0.5 * np.exp(1.5)
    assert abs(b.phi[0] - exact) < 1e-6 * exact
    assert abs(closedform.phi_real_raw(0.5, 0.5, equal0)[0] - exact) < 1e-9 * exact
    assert b.exit_time[0] == pytest.approx(np.log(2) / 3, abs=1e-8)


def test_equal_zero_inside_domain(equal0):
    b = flow.integrate_many(np.array([0.3 + 0j]), equal0, 0.5)
    assert abs(b.phi[0].real - closedform.phi_real(0.5, 0.3, equal0)) < 1e-6


def test_residuals_small(equal04, free_ab, custom2):
    for init in (equal04, free_ab, custom2):
        tr = flow.integrate(0.3 + 0.2j, init, 1.0)
        assert flow.residual_char_eq(tr, init) < 1e-7
        assert flow.residual_k_subordination(tr, init) < 1e-7
        assert flow.residual_exp_form(tr) < 1e-7
        assert flow.imag_log_bound_violation(tr) <= 1e-9


def test_ibp_free(free_ab):
    tr = flow.integrate(0.4, free_ab, 1.0)
    assert flow.ibp_check(tr) < 1e-6


def test_ibp_trivial(equal0):
    tr = flow.integrate(0.3j, equal0, 0.5)
    assert flow.ibp_check(tr) < 1e-8


def test_exit_detected_and_censoring(equal0):
    tr = flow.integrate(0.9, equal0, 2.0)
    assert tr.status == "exited" and tr.exit_time is not None
    assert abs(abs(tr.phi[-1]) - 1) < 1e-8
    tr = flow.integrate(0.1j, equal0, 0.1)
    assert tr.censored and tr.exit_time is None


def test_batch_matches_single(custom2):
    z = np.array([0.2 + 0.1j, -0.4 + 0.3j])
    b = flow.integrate_many(z, custom2, 0.7)
    for k in range(2):
        tr = flow.integrate(z[k], custom2, 0.7)
        assert abs(tr.phi[-1] - b.phi[k]) < 1e-9


def test_pole_exit_real_seed(free_ab):
    # real seeds beyond x_+ run into the pole at +1
    b = flow.integrate_many(np.array([0.95 + 0j]), free_ab, 1.0)
    assert b.status[0] == flow.EXITED


def test_seed_validation(free_ab):
    with pytest.raises(DomainError):
        flow.integrate_many(np.array([1.0 + 0j]), free_ab, 1.0)


def test_to_csv(tmp_path, free_ab):
    tr = flow.integrate(0.2j, free_ab, 0.1)
    path = tmp_path / "tr.csv"
    flow.to_csv(tr, path)
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    lines = raw.decode().splitlines()
    assert lines[0].startswith("t,re_phi")
    assert len(lines) == tr.t.size + 1
