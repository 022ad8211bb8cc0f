import numpy as np
import pytest

from capexeq.clearing import (
    EquilibriumProfile,
    PowerLawStrategy,
    TabulatedStrategy,
    aggregate_I,
    aggregate_I_derivative,
    asymptotic_slope,
    h_inverse,
    h_of,
)
from capexeq.population import ProducerType, kappa0
from conftest import random_population


def test_aggregate_small_z_limit(s1_producer, s1_market):
    fam = [PowerLawStrategy(1.0, 2.0)]
    k0 = kappa0([s1_producer], beta=1.0)
    val = aggregate_I(fam, [s1_producer], beta=1.0, gamma=1.0, z=0.0)
    assert val == pytest.approx(k0 ** -1.0)
    # tiny z: thresholds c dominate, same limit
    val = aggregate_I(fam, [s1_producer], beta=1.0, gamma=1.0, z=1e-9)
    assert val == pytest.approx(k0 ** -1.0)


def test_aggregate_s1_closed_form(s1_producer, s1_market):
    # I[Psi](pbar) with Psi = pbar^4 (K=1, e=4): psi = (1 v pbar^2)^{-1}
    fam = [PowerLawStrategy(1.0, 4.0)]
    for pb in (0.3, 0.9, 1.0, 1.5, 4.0):
        got = aggregate_I(fam, [s1_producer], beta=1.0, gamma=1.0, z=pb)
        assert got == pytest.approx(min(1.0, pb ** -2.0), rel=1e-14)


def test_aggregate_derivative_left_convention(s1_producer):
    fam = [PowerLawStrategy(1.0, 4.0)]
    # at the activation point z=1 the left derivative treats the producer
    # as still inactive (strict inequality c < X(z))
    d = aggregate_I_derivative(fam, [s1_producer], beta=1.0, gamma=1.0, z=1.0)
    assert d.value == pytest.approx(0.0)
    d = aggregate_I_derivative(fam, [s1_producer], beta=1.0, gamma=1.0, z=2.0)
    # psi = pbar^{-2} beyond activation: d/dz = -2 z^{-3}
    assert d.value == pytest.approx(-2.0 * 2.0 ** -3.0, rel=1e-12)


def test_tabulated_strategy_matches_power_law():
    z = np.geomspace(0.01, 100.0, 400)
    power = PowerLawStrategy(2.0, 1.5)
    tab = TabulatedStrategy(z, power.value(z))
    zz = np.geomspace(0.02, 50.0, 37)
    assert np.allclose(tab.value(zz), power.value(zz), rtol=1e-4)
    assert not tab.exact_derivative and power.exact_derivative


def test_h_inverse_roundtrip_free_function(s1_profile):
    for xb in (1e-4, 0.3, 1.0, 7.0, 1e5):
        pb = h_inverse(s1_profile.psi, beta=1.0, xbar=xb)
        assert h_of(s1_profile.psi, 1.0, pb) == pytest.approx(xb, rel=1e-9)


def test_s1_profile_closed_forms(s1_profile):
    eq = s1_profile
    pb = np.geomspace(1e-3, 1e4, 200)
    assert np.allclose(eq.psi(pb), np.minimum(1.0, pb ** -2.0), rtol=1e-12)
    want_h = np.where(pb <= 1.0, pb**2, pb**4)
    assert np.allclose(eq.h(pb), want_h, rtol=1e-12)
    xb = np.geomspace(1e-4, 1e6, 200)
    assert np.allclose(eq.phi(xb), np.minimum(1.0, xb ** -0.5), rtol=1e-9)
    want_hi = np.where(xb <= 1.0, xb**0.5, xb**0.25)
    assert np.allclose(eq.h_inv(xb), want_hi, rtol=1e-9)
    assert np.allclose(eq.Phi(xb, 0), np.where(xb <= 1, xb**2, xb), rtol=1e-9)


def test_u_inverse_is_exact(s1p_profile):
    eq = s1p_profile
    xb = np.geomspace(1e-3, 1e5, 50)
    v = eq.u(xb)
    assert np.allclose(eq.u_inv(v), xb, rtol=1e-9)


def test_fixed_point_multi_type(fivetype_market):
    pop = random_population(19)
    eq = EquilibriumProfile(pop, fivetype_market)
    assert eq.fixed_point_residual < 1e-8
    # equilibrium curves are monotone in the expected directions
    assert np.all(np.diff(eq.psi_grid) <= 0)
    assert np.all(np.diff(eq.h_grid) > 0)
    assert np.all(np.diff(eq.phi_grid) <= 0)
    assert np.all(np.diff(eq.u_grid) > 0)


def test_multi_type_h_roundtrip(fivetype_market):
    pop = random_population(19)
    eq = EquilibriumProfile(pop, fivetype_market)
    pb = np.geomspace(1e-2, 1e4, 300)
    assert np.max(np.abs(eq.h_inv(eq.h(pb)) / pb - 1.0)) < 1e-9


def test_activation_prices_sorted_into_segments(fivetype_market):
    pop = random_population(19)
    eq = EquilibriumProfile(pop, fivetype_market)
    # just left/right of each activation price, psi is continuous
    for ap in eq.activation_pbar:
        lo = eq.psi(ap * (1 - 1e-9))
        hi = eq.psi(ap * (1 + 1e-9))
        assert hi == pytest.approx(lo, rel=1e-7)


def test_asymptotic_slope_fit():
    z = np.geomspace(1.0, 1e4, 50)
    fit = asymptotic_slope(z, 3.0 * z ** -1.25)
    assert fit.slope == pytest.approx(-1.25, abs=1e-10)
    assert fit.halfwidth < 1e-9
    with pytest.raises(ValueError):
        asymptotic_slope(z[:4], (3.0 * z ** -1.25)[:4])
