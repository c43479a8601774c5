import numpy as np
import pytest

from dgshock.flux import InterfaceState, advection_flux, burgers_flux, global_wave_speed, lax_friedrichs

GRID = np.linspace(-2, 2, 41)


def test_advection_flux():
    m = advection_flux(1.0)
    assert m.F(0.25) == 0.25 and m.F(0.0) == 0.0
    assert m.dFdu(7.0) == 1.0


def test_burgers_flux():
    m = burgers_flux()
    assert m.F(1.0) == 0.5 and m.F(-1.0) == 0.5 and m.F(0.0) == 0.0


@pytest.mark.parametrize("model", [advection_flux(1.0), advection_flux(-0.7), burgers_flux()])
def test_derivative_matches_finite_differences(model):
    eps = 1e-6
    fd = (model.F(GRID + eps) - model.F(GRID - eps)) / (2 * eps)
    np.testing.assert_allclose(model.dFdu(GRID), fd, rtol=1e-6, atol=1e-9)


def test_lax_friedrichs_examples():
    assert lax_friedrichs(advection_flux(1.0), InterfaceState(0.25, 0.0, 1.0)) == 0.25
    b = burgers_flux()
    for n in (1.0, -1.0):
        assert abs(lax_friedrichs(b, InterfaceState(0.7, 0.7, n)) - n * 0.245) < 1e-15
    assert lax_friedrichs(b, InterfaceState(1.0, -1.0, 1.0)) == 1.5


@pytest.mark.parametrize("model", [advection_flux(1.0), burgers_flux()])
def test_consistency(model):
    for n in (1.0, -1.0):
        np.testing.assert_allclose(lax_friedrichs(model, InterfaceState(GRID, GRID, n)), n * model.F(GRID),
                                   atol=1e-14)


@pytest.mark.parametrize("model", [advection_flux(1.0), advection_flux(-2.0), burgers_flux()])
def test_monotonicity(model):
    a, b = np.meshgrid(GRID, GRID, indexing="ij")
    f = lax_friedrichs(model, InterfaceState(a, b, 1.0))
    assert np.all(np.diff(f, axis=0) >= -1e-14)  # non-decreasing in u-
    assert np.all(np.diff(f, axis=1) <= 1e-14)  # non-increasing in u+


@pytest.mark.parametrize("model", [advection_flux(1.0), burgers_flux()])
def test_conservative_across_face(model):
    a, b = np.meshgrid(GRID, GRID, indexing="ij")
    from_left = lax_friedrichs(model, InterfaceState(a, b, 1.0))
    from_right = lax_friedrichs(model, InterfaceState(b, a, -1.0))
    np.testing.assert_allclose(from_left, -from_right, atol=1e-14)


def test_global_variant_more_diffusive():
    b = burgers_flux()
    u = np.array([0.1, 2.0])
    C = global_wave_speed(b, u)
    assert C == 2.0
    local = lax_friedrichs(b, InterfaceState(0.1, 0.0, 1.0))
    glob = lax_friedrichs(b, InterfaceState(0.1, 0.0, 1.0), C=C)
    assert glob > local


def test_bad_normal():
    with pytest.raises(ValueError):
        InterfaceState(0.0, 1.0, 0.5)
