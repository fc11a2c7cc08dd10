import numpy as np
import pytest

from liberation import closedform, domain, flow
from liberation.errors import DomainError
from liberation.transforms import phi_weight


def test_context_equal_zero(equal0):
    z = 0.4
    ctx = closedform.context(z, equal0)
    assert abs(ctx.c - ((1 + z) / (1 - z)) ** 2) < 1e-12


def test_context_free(free_ab):
    ctx = closedform.context(0.3, free_ab)
    p = free_ab.params
    z = np.array([0.3 + 0j])
    k0sq = free_ab.herglotz0(z)[0] ** 2 - phi_weight(z, p)[0] ** 2
    assert abs(ctx.c - (k0sq + (p.a + p.b) ** 2)) < 1e-12
    with pytest.raises(DomainError):
        closedform.context(0.0, free_ab)


@pytest.mark.parametrize("name", ["equal04", "free_ab", "custom2"])
def test_identity_at_zero(name, request):
    init = request.getfixturevalue(name)
    for z in (-0.6, -0.3, -0.1, 0.1, 0.3, 0.6):
        assert abs(closedform.phi_real(0.0, z, init) - z) < 1e-9


def test_origin_fixed(free_ab):
    assert closedform.phi_real(0.7, 0.0, free_ab) == 0.0


def test_free_against_ode(free_ab):
    b = flow.integrate_many(np.array([0.3 + 0j]), free_ab, 0.5)
    assert abs(closedform.phi_real(0.5, 0.3, free_ab) - b.phi[0].real) < 1e-6


@pytest.mark.parametrize("name", ["equal04", "free_ab", "custom2"])
def test_monotone_inside_interval(name, request):
    init = request.getfixturevalue(name)
    t = 0.5
    xm, xp, _ = domain.x_endpoints(t, init)
    z = np.linspace(xm, xp, 102)[1:-1] * 0.995
    vals = closedform.phi_real(t, z, init)
    assert np.all(np.abs(vals) < 1)
    assert np.all(np.diff(vals) > 0)


def test_endpoint_reaches_one(free_ab):
    t = 0.5
    _, xp, _ = domain.x_endpoints(t, free_ab)
    gaps = [1 - closedform.phi_real(t, xp - e, free_ab) for e in (1e-3, 1e-5, 1e-7)]
    assert gaps[0] > gaps[1] > gaps[2] >= 0
    assert gaps[2] < 1e-3


def test_rejects_outside(equal0):
    # phi = z exp(3t) leaves the disc at t = ln 2 / 3 for z = 1/2
    with pytest.raises(DomainError):
        closedform.phi_real(0.5, 0.5, equal0)
    with pytest.raises(DomainError):
        closedform.phi_real(0.1, 0.2 + 0.1j, equal0)
