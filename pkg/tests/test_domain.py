import numpy as np
import pytest

from liberation import domain
from liberation.errors import DomainError


def test_contains_trivial(free_ab):
    assert domain.contains(0j, 3.0, free_ab)
    assert domain.contains(0.9 + 0.3j, 0.0, free_ab)


def test_contains_nesting(custom2, rng):
    z = 0.95 * np.sqrt(rng.uniform(size=200)) * np.exp(1j * rng.uniform(-np.pi, np.pi, 200))
    late = domain.contains(z, 1.0, custom2)
    early = domain.contains(z, 0.4, custom2)
    assert np.all(early[late])


def test_h_t_matches_contains(equal04, rng):
    n = 500
    r = np.sqrt(rng.uniform(0.01, 0.95, n))
    th = rng.uniform(-np.pi, np.pi, n)
    t = 0.5
    h = domain.h_t_value(r, th, t, equal04)
    inside = domain.contains(r * np.exp(1j * th), t, equal04)
    assert np.array_equal(h > 0, inside)
    assert np.all(h[inside] <= 1 + 1e-12)


def test_h_t_trivial_and_exit(equal0):
    assert domain.h_t_value(0.3, 1.0, 0.0, equal0) == 1.0
    z = 0.6
    te = float(domain.exit_times(np.array([z + 0j]), 2.0, equal0)[0])
    assert abs(domain.h_t_value(z, 0.0, te, equal0)) < 1e-6
    with pytest.raises(DomainError):
        domain.h_t_value(1.0, 0.0, 0.5, equal0)


def test_equal_zero_has_circle_arc(equal0):
    s = domain.trace_boundary(0.2, 36, equal0)
    far = np.abs(s.theta) > np.pi / 2
    assert np.any(s.kind[far] == domain.CIRCLE)
    assert np.all((s.r == 1) == (s.kind == domain.CIRCLE))


def test_boundary_invariants(free_ab):
    snaps = [domain.trace_boundary(t, 48, free_ab) for t in (0.2, 0.5, 1.0)]
    for a, b in zip(snaps, snaps[1:]):
        assert domain.nested(b, a)
    for s in snaps:
        n = s.theta.size
        mirror = (n - 2 - np.arange(n)) % n
        assert np.max(np.abs(s.r - s.r[mirror])) <= 1e-9
        assert domain.is_simple_closed(s.points)
        assert s.x_minus < 0 < s.x_plus
        assert s.flags["non_monotone_rays"] == []
    with pytest.raises(DomainError):
        domain.trace_boundary(0.0, 8, free_ab)


def test_simple_closed_detects_crossing():
    bowtie = np.array([0, 1 + 1j, 1, 1j]) * 0.5
    assert not domain.is_simple_closed(bowtie)
    assert domain.is_simple_closed(0.5 * np.exp(2j * np.pi * np.arange(16) / 16))


def test_x_endpoints_shrink_towards_circle(custom2):
    ends = [domain.x_endpoints(t, custom2)[:2] for t in (1e-3, 0.05, 0.5)]
    xm, xp = np.array(ends).T
    assert np.all(np.diff(xm) > 0) and np.all(np.diff(xp) < 0)
    assert xm[-1] < 0 < xp[-1]
    assert xp[0] > 0.95 and xm[0] < -0.95


def test_x_endpoints_exit_exactly(free_ab):
    t = 0.5
    xm, xp, _ = domain.x_endpoints(t, free_ab)
    inner = domain.exit_times(np.array([xp - 1e-6, xm + 1e-6], complex), t, free_ab)
    outer = domain.exit_times(np.array([xp + 1e-6, xm - 1e-6], complex), t, free_ab)
    assert np.all(np.isinf(inner)) and np.all(outer < t)


def test_boundary_derivative_range(equal04):
    s = domain.trace_boundary(0.3, 24, equal04)
    th = s.theta[s.kind == domain.CIRCLE]
    assert th.size > 0
    for theta in th[:3]:
        lim = domain.boundary_derivative_limit(theta, 0.3, equal04)
        var = domain.variational_boundary_estimate(theta, 0.3, equal04)
        assert 0 <= lim < 2
        assert abs(lim - var) < 1e-3


def test_boundary_derivative_identity_at_zero(free_ab):
    assert domain.boundary_derivative_limit(0.4, 0.0, free_ab) == pytest.approx(2, abs=1e-6)


def test_exit_times_failure_propagates(free_ab):
    t = domain.exit_times(np.array([0.2j]), 0.5, free_ab)
    assert np.isinf(t[0])

