import math

import numpy as np
import pytest
from scipy.integrate import quad

from capexeq.clearing import NumericalError
from capexeq.control import ConstantPhi, ControlSolution, PowerPhi
from capexeq.population import ParameterError


@pytest.fixture(scope="module")
def s1_sol(s1_producer, s1_market, s1_profile):
    return ControlSolution(s1_producer, s1_market, s1_profile)


@pytest.fixture(scope="module")
def s1p_sol(s1p_producer, s1_market, s1p_profile):
    return ControlSolution(s1p_producer, s1_market, s1p_profile)


def test_s1_boundaries_closed_form(s1_sol):
    # G(c, xbar) = sqrt(c * xbar) and Gamma(x, xbar) = x^2 / xbar for xbar > 1
    for c, xb in ((0.5, 2.0), (1.0, 4.0), (2.0, 9.0)):
        assert float(s1_sol.G(c, xb)) == pytest.approx(math.sqrt(c * xb), rel=1e-9)
    for x, xb in ((1.0, 2.0), (2.0, 4.0), (3.0, 9.0)):
        assert float(s1_sol.Gamma(x, xb)) == pytest.approx(x * x / xb, rel=1e-9)
    assert float(s1_sol.Phi(4.0)) == pytest.approx(4.0, rel=1e-9)
    assert float(s1_sol.Phi_inv(4.0)) == pytest.approx(4.0, rel=1e-9)


def test_boundaries_are_inverse_pair(s1p_sol):
    for c, xb in ((0.3, 2.0), (0.7, 3.0), (1.1, 5.0)):
        g = float(s1p_sol.G(c, xb))
        assert float(s1p_sol.Gamma(g, xb)) == pytest.approx(c, rel=1e-12)


def test_s1_coefficient_closed_form(s1_sol):
    for xb in np.geomspace(1.05, 40.0, 12):
        assert s1_sol.A(float(xb)) == pytest.approx(-(xb ** -1.5) / 6.0, rel=1e-8)


def test_coefficient_cross_check_guard(s1p_sol):
    a1, a2 = s1p_sol._A_pair(2.5)
    assert abs(a1 - a2) <= 1e-7 * abs(a1)
    # the public accessor enforces the agreement tolerance
    assert s1p_sol.A(2.5) == pytest.approx(0.5 * (a1 + a2))


def test_region_classification(s1_sol):
    # Gamma(2, 4) = 1, Phi(4) = 4
    assert s1_sol.region(1.0, 2.0, 4.0) == "S1"
    assert s1_sol.region(0.5, 2.0, 4.0) == "C1"
    assert s1_sol.region(2.0, 2.0, 4.0) == "C2"
    assert s1_sol.region(4.0, 2.0, 4.0) == "S2"
    assert s1_sol.region(6.0, 2.0, 4.0) == "C3"
    with pytest.raises(ParameterError):
        s1_sol.region(1.0, 5.0, 4.0)  # x > xbar


def test_middle_region_singularity_raises(s1_sol):
    # n(1-alpha) = 1 exactly: the middle-region coefficient is undefined
    assert not s1_sol.c2_available
    with pytest.raises(NumericalError):
        s1_sol.B(2.0, 4.0)
    with pytest.raises(NumericalError):
        s1_sol.value(2.0, 2.0, 4.0)  # C2 state needs B


def test_value_continuity_across_surfaces(s1p_sol):
    xb = 3.0
    gam = float(s1p_sol.Gamma(1.4, xb))
    phi = float(s1p_sol.Phi(xb))
    for cc, xx in ((gam, 1.4), (phi, 2.2)):
        lo = s1p_sol.value(cc * (1 - 1e-9), xx, xb)
        hi = s1p_sol.value(cc * (1 + 1e-9), xx, xb)
        assert hi == pytest.approx(lo, rel=1e-8)


def test_outer_region_tail_identity(s1p_sol):
    # the x^n coefficient via the tail identity equals A(xbar) plus the
    # direct quadrature of f from Phi(xbar) to c
    xb = 2.0
    phi_xb = float(s1p_sol.Phi(xb))
    c = 1.8 * phi_xb
    direct = s1p_sol.A(xb) + quad(s1p_sol.f, phi_xb, c, limit=200)[0]
    assert s1p_sol._outer_coef(c, xb) == pytest.approx(direct, rel=1e-9)


def test_investment_region_value_recursion(s1p_sol):
    # in the investing region the value is linear in c with slope k
    xb, x = 3.0, 1.5
    gam = float(s1p_sol.Gamma(x, xb))
    w1 = s1p_sol.value(0.5 * gam, x, xb)
    w2 = s1p_sol.value(0.8 * gam, x, xb)
    assert (w2 - w1) == pytest.approx(s1p_sol.k * 0.3 * gam, rel=1e-12)


def test_hjb_residual_regions(s1p_sol):
    xb = 3.0
    res = s1p_sol.hjb_residual(1.2 * float(s1p_sol.Phi(xb)), 0.7 * xb, xb)
    assert res.region == "C3"
    assert abs(res.pde_residual) / res.pde_scale < 1e-6
    assert res.gradient_slack < 0  # w_c < k while waiting
    res = s1p_sol.hjb_residual(0.4 * float(s1p_sol.Gamma(1.0, xb)), 1.0, xb)
    assert res.region == "C1"
    assert res.pde_residual < 0  # strict supersolution while investing
    assert res.gradient_slack == pytest.approx(0.0, abs=1e-8)  # w_c = k


def test_boundary_slack_on_diagonal(s1p_sol):
    xb = 3.0
    res = s1p_sol.hjb_residual(1.3 * float(s1p_sol.Phi(xb)), xb, xb)
    assert res.boundary_slack is not None
    assert abs(res.boundary_slack) < 1e-6


def test_smooth_pasting_report(s1p_sol):
    rep = s1p_sol.smooth_pasting_check(0.8, 3.0)
    assert rep["w_c_rel_err"] < 1e-5
    assert abs(rep["w_cx_at_G"]) < 1e-4
    assert abs(rep["fb1_residual"]) < 1e-10
    assert rep["fb2_rel"] < 1e-10
    assert rep["fb3_rel"] < 1e-6


def test_threshold_uniqueness_quadrature(s1p_sol, s1_market):
    # the boundary G is the unique zero of the discounted marginal-profit
    # balance: int_0^G y^{-m-1} (alpha c^{alpha-1} y phi(xbar) - r k) dy = 0
    m = s1p_sol.m
    alpha, k, r = s1p_sol.alpha, s1p_sol.k, s1p_sol.r
    for c, xb in ((0.6, 2.0), (1.0, 3.5)):
        g = float(s1p_sol.G(c, xb))
        phi = float(s1p_sol.phi_fn.phi(xb))
        val = quad(
            lambda y: y ** (-m - 1.0) * (alpha * c ** (alpha - 1.0) * y * phi
                                         - r * k),
            0.0, g, limit=200,
        )[0]
        scale = r * k * g ** (-m) / (-m)
        assert abs(val) / scale < 1e-9
        # and at the boundary the marginal unit earns its annuity markup
        assert float(s1p_sol.Gamma(g, xb)) == pytest.approx(c, rel=1e-12)
        n = s1p_sol.n
        foc = alpha * c ** (alpha - 1.0) * g * phi / (r - s1_market.mu)
        assert foc == pytest.approx(n * k / (n - 1.0), rel=1e-12)


def test_constant_phi_functional(s1p_producer, s1_market):
    phi0 = ConstantPhi(0.7)
    sol = ControlSolution(s1p_producer, s1_market, phi0)
    # Phi(xbar) = K (0.7 xbar)^{1/(1-alpha)} and A from a pure power tail
    xb = 2.0
    want = sol.K * (0.7 * xb) ** (1.0 / (1.0 - sol.alpha))
    assert float(sol.Phi(xb)) == pytest.approx(want, rel=1e-12)
    a1, a2 = sol._A_pair(xb)
    assert a1 == pytest.approx(a2, rel=1e-9)
    # closed form: with Phi = coef y^s, integral_xbar^inf y^{-n-1} Phi dy
    # = coef xbar^{s-n}/(n-s)
    s = 1.0 / (1.0 - sol.alpha)
    coef = sol.K * 0.7**s
    n, alpha, k = sol.n, sol.alpha, sol.k
    i1 = coef * xb ** (s - n) / (n - s)
    phixb = float(sol.Phi(xb))
    want_a = (-((1 - alpha) * (n - 1) + 1) * k / (alpha * (n - 1))
              * xb ** -n * phixb ** (1 - alpha)
              + (1 - alpha) * n * k / alpha * phixb ** -alpha * i1)
    assert sol.A(xb) == pytest.approx(want_a, rel=1e-10)


def test_power_phi_growth_violation(s1p_producer, s1_market):
    # phi constant means Phi grows like xbar^{1/(1-alpha)} = xbar^{1.82},
    # fine for n = 2; a producer with smaller n must be rejected
    from capexeq.population import ProducerType
    lazy = ProducerType(c=1.0, alpha=0.6, lam=0.5, k=0.2, r=0.9)
    with pytest.raises(NumericalError):
        ControlSolution(lazy, s1_market, ConstantPhi(1.0))


def test_power_phi_inverse():
    pf = PowerPhi(2.0, 0.4)
    x = np.geomspace(0.1, 20.0, 9)
    assert np.allclose(pf.u_inv(pf.u(x)), x, rtol=1e-12)
    assert np.allclose(pf.u_deriv(x), 0.6 * 2.0 * x ** -0.4, rtol=1e-12)
