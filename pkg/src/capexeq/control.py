"""Closed-form solution of a single producer's expansion problem.

Given any price functional phi (the equilibrium one from the clearing
module, or a user-supplied constant / power law with admissible growth),
the producer's value function is known in closed form up to a coefficient
A(xbar) defined by convergent tail integrals of the investment threshold
Phi.  This module evaluates the free boundaries G / Gamma / Phi, the
value-function pieces, and provides finite-difference residual checks of
the dynamic programming equation that the closed form must satisfy.

State convention: (c, x, xbar) with 0 < x <= xbar, c > 0.
Regions:
    C1  invest       c <= Gamma(x, xbar)        (jump to the boundary)
    C2  wait         Gamma < c < Phi(xbar)
    C3  wait         c >= Phi(xbar)
with surface labels S1 (c = Gamma) and S2 (c = Phi) on ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clearing import NumericalError
from .population import (
    DerivedMarket,
    ParameterError,
    ProducerType,
    characteristic_roots,
    investment_coefficient,
)


# ---------------------------------------------------------------------------
# Price functionals usable in place of the equilibrium profile
# ---------------------------------------------------------------------------


class ConstantPhi:
    """phi(x) = phi0.  Needs n(1-alpha) > 1 for the tail integrals."""

    def __init__(self, value: float):
        if value <= 0:
            raise ParameterError("phi0 must be > 0")
        self.value = value
        self.tail_exponent = 0.0
        self.phi_max = value

    def phi(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def phi_deriv(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def u(self, x):
        return self.value * np.asarray(x, dtype=float)

    def u_deriv(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def u_inv(self, v):
        return np.asarray(v, dtype=float) / self.value

    def kink_points(self):
        return np.empty(0)


class PowerPhi:
    """phi(x) = coef * x**(-decay) with 0 <= decay < 1 so x*phi increases."""

    def __init__(self, coef: float, decay: float):
        if coef <= 0 or not (0.0 <= decay < 1.0):
            raise ParameterError("need coef > 0 and decay in [0, 1)")
        self.coef = coef
        self.decay = decay
        self.tail_exponent = decay
        self.phi_max = math.inf if decay > 0 else coef

    def phi(self, x):
        return self.coef * np.asarray(x, dtype=float) ** (-self.decay)

    def phi_deriv(self, x):
        x = np.asarray(x, dtype=float)
        return -self.decay * self.coef * x ** (-self.decay - 1.0)

    def u(self, x):
        return self.coef * np.asarray(x, dtype=float) ** (1.0 - self.decay)

    def u_deriv(self, x):
        x = np.asarray(x, dtype=float)
        return (1.0 - self.decay) * self.coef * x ** (-self.decay)

    def u_inv(self, v):
        v = np.asarray(v, dtype=float)
        return (v / self.coef) ** (1.0 / (1.0 - self.decay))

    def kink_points(self):
        return np.empty(0)


#: proximity (relative) at which a state is snapped onto a boundary surface
SURFACE_TIE_TOL = 1e-12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _gl_integrate(f, a: float, b: float, breakpoints=(), max_panel: float = 1.5):
    """Composite 32-point Gauss-Legendre quadrature of a vectorized f.

    Panels are split at the given interior breakpoints and capped at
    max_panel width; for the smooth, exponentially decaying integrands
    here this reaches near machine precision at a few hundred evaluations.
    """
    if b <= a:
        return 0.0
    edges = [a]
    for p in sorted(breakpoints):
        if a < p < b:
            edges.append(p)
    edges.append(b)
    ts = []
    ws = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = max(1, math.ceil((hi - lo) / max_panel))
        sub = np.linspace(lo, hi, k + 1)
        half = 0.5 * np.diff(sub)
        mid = 0.5 * (sub[:-1] + sub[1:])
        ts.append((mid[:, None] + half[:, None] * _GL_NODES).ravel())
        ws.append((half[:, None] * _GL_WEIGHTS).ravel())
    t = np.concatenate(ts)
    w = np.concatenate(ws)
    return float(np.dot(w, f(t)))


@dataclass
class HJBResidual:
    region: str
    pde_residual: float  # L w + c^alpha x phi(xbar), absolute
    pde_scale: float  # c^alpha x phi(xbar), for relative comparisons
    gradient_slack: float  # w_c - k
    boundary_slack: float | None  # w_xbar near x = xbar, when applicable


class ControlSolution:
    """Value function and free boundaries for one producer against phi."""

    def __init__(
        self,
        producer: ProducerType,
        market: DerivedMarket,
        phi,
        a_cross_tol: float = 1e-7,
        tail_rel: float = 1e-13,
        quad_rel: float = 1e-11,
    ):
        if producer.r <= market.mu:
            raise ParameterError("r must exceed mu for a finite value function")
        self.producer = producer
        self.market = market
        self.phi_fn = phi
        self.m, self.n = characteristic_roots(market.mu, market.sigma, producer.r)
        self.K = investment_coefficient(producer, market)
        self.alpha = producer.alpha
        self.k = producer.k
        self.r = producer.r
        self.rmu = producer.r - market.mu
        self.n1a = self.n * (1.0 - self.alpha)
        self.c2_available = abs(self.n1a - 1.0) >= 1e-8
        self.a_cross_tol = a_cross_tol
        self.tail_rel = tail_rel
        self.quad_rel = quad_rel
        # Phi(y) ~ y**phi_growth for large y; must stay below n (growth cond.)
        self.phi_growth = (1.0 - phi.tail_exponent) / (1.0 - self.alpha)
        if self.phi_growth >= self.n:
            raise NumericalError(
                f"tail divergence: Phi grows like y^{self.phi_growth:.4g} "
                f">= n = {self.n:.4g}; growth assumption violated"
            )
        self._A_cache: dict[float, float] = {}
        self._coef_cache: dict[tuple[float, float], float] = {}

    # -- free boundaries -----------------------------------------------------

    def G(self, c, xbar):
        """Demand level at which capability c starts binding: the state is
        pushed rightward of x = G(c, xbar) by investment."""
        c = np.asarray(c, dtype=float)
        return (
            self.rmu
            * self.n
            * self.k
            / (self.alpha * (self.n - 1.0))
            * c ** (1.0 - self.alpha)
            / self.phi_fn.phi(xbar)
        )

    def Gamma(self, x, xbar):
        """Inverse of G in c: target capability at demand level x."""
        x = np.asarray(x, dtype=float)
        return self.K * (x * self.phi_fn.phi(xbar)) ** (1.0 / (1.0 - self.alpha))

    def Phi(self, xbar):
        """Investment threshold on the diagonal x = xbar."""
        return self.K * self.phi_fn.u(xbar) ** (1.0 / (1.0 - self.alpha))

    def Phi_deriv(self, xbar):
        u = self.phi_fn.u(xbar)
        return (
            self.K
            / (1.0 - self.alpha)
            * u ** (self.alpha / (1.0 - self.alpha))
            * self.phi_fn.u_deriv(xbar)
        )

    def Phi_inv(self, c):
        """xbar such that Phi(xbar) = c, via the closed-form inverse of u."""
        c = np.asarray(c, dtype=float)
        return self.phi_fn.u_inv((c / self.K) ** (1.0 - self.alpha))

    # -- coefficient A and the f / B pieces -----------------------------------

    def A(self, xbar: float) -> float:
        """Coefficient of x^n in the outer region, by tail quadrature.

        Evaluates both equivalent tail-integral expressions and returns
        their common value; raises if they disagree beyond a_cross_tol.
        """
        key = float(xbar)
        if key in self._A_cache:
            return self._A_cache[key]
        a1, a2 = self._A_pair(key)
        denom = max(abs(a1), abs(a2), 1e-300)
        if abs(a1 - a2) > self.a_cross_tol * denom:
            raise NumericalError(
                f"A(xbar) cross-check failed at xbar={xbar}: {a1} vs {a2}"
            )
        val = 0.5 * (a1 + a2)
        self._A_cache[key] = val
        return val

    def _A_pair(self, xbar: float) -> tuple[float, float]:
        n, alpha, k = self.n, self.alpha, self.k
        s = self.phi_growth
        t_star = -math.log(self.tail_rel) / (n - s)
        kinks = np.asarray(self.phi_fn.kink_points(), dtype=float)
        pts = np.log(kinks[(kinks > xbar) & (kinks < xbar * math.exp(t_star))] / xbar)

        def g1(t):  # y^{-n-1} Phi(y) dy  with y = xbar e^t
            y = xbar * np.exp(t)
            return y ** (-n) * np.asarray(self.Phi(y), dtype=float)

        def g2(t):  # y^{-n} Phi'(y) dy
            y = xbar * np.exp(t)
            return y ** (1.0 - n) * np.asarray(self.Phi_deriv(y), dtype=float)

        i1 = _gl_integrate(g1, 0.0, t_star, breakpoints=pts)
        i2 = _gl_integrate(g2, 0.0, t_star, breakpoints=pts)
        cut = xbar * math.exp(t_star)
        phi_cut = float(self.Phi(cut))
        i1 += phi_cut * cut ** (-n) / (n - s)
        i2 += s * phi_cut * cut ** (-n) / (n - s)

        phixb = float(self.Phi(xbar))
        a1 = (
            -((1.0 - alpha) * (n - 1.0) + 1.0)
            * k
            / (alpha * (n - 1.0))
            * xbar ** (-n)
            * phixb ** (1.0 - alpha)
            + (1.0 - alpha) * n * k / alpha * phixb ** (-alpha) * i1
        )
        a2 = (
            -k / (alpha * (n - 1.0)) * xbar ** (-n) * phixb ** (1.0 - alpha)
            + (1.0 - alpha) * k / alpha * phixb ** (-alpha) * i2
        )
        return a1, a2

    def f(self, y: float) -> float:
        """Integrand of the outer-region correction; negative on the range
        of Phi."""
        xb = float(self.Phi_inv(y))
        return (
            -self.k / (self.n - 1.0) * y ** (-self.alpha) * xb ** (-self.n)
            - self.alpha / y * self.A(xb)
        )

    def f_tilde(self, xbar: float) -> float:
        self._require_c2()
        phixb = float(self.Phi(xbar))
        return float(phixb**self.alpha * self.A(xbar)) - self.k / (
            (self.n - 1.0) * (self.n1a - 1.0)
        ) * xbar ** (-self.n) * phixb

    def B(self, c: float, xbar: float) -> float:
        self._require_c2()
        phixb = float(self.Phi(xbar))
        return self.f_tilde(xbar) + self.k / (
            (self.n - 1.0) * (self.n1a - 1.0)
        ) * c ** (1.0 - self.n1a) * xbar ** (-self.n) * phixb**self.n1a

    def _require_c2(self):
        if not self.c2_available:
            raise NumericalError(
                "n(1-alpha) = 1: middle-region formulas are singular; "
                "perturb alpha"
            )

    # -- state classification and the value function --------------------------

    def region(self, c: float, x: float, xbar: float) -> str:
        if not (0.0 < x <= xbar) or c <= 0:
            raise ParameterError("state must satisfy 0 < x <= xbar, c > 0")
        gam = float(self.Gamma(x, xbar))
        phixb = float(self.Phi(xbar))
        if abs(c - gam) <= SURFACE_TIE_TOL * max(c, gam):
            return "S1"
        if abs(c - phixb) <= SURFACE_TIE_TOL * max(c, phixb):
            return "S2"
        if c < gam:
            return "C1"
        if c > phixb:
            return "C3"
        return "C2"

    def _phi_deriv_integral(self, a: float, b: float) -> float:
        """int_a^b y^{1-n} phi'(y) dy, with kinks of phi as quad points."""
        if b <= a:
            return 0.0
        kinks = np.asarray(self.phi_fn.kink_points(), dtype=float)
        pts = np.log(kinks[(kinks > a) & (kinks < b)] / a)

        def g(t):  # y^{1-n} phi'(y) dy  with y = a e^t
            y = a * np.exp(t)
            return y ** (2.0 - self.n) * np.asarray(
                self.phi_fn.phi_deriv(y), dtype=float
            )

        return _gl_integrate(g, 0.0, math.log(b / a), breakpoints=pts)

    def _outer_coef(self, c: float, xbar: float) -> float:
        """A(xbar) + int_{Phi(xbar)}^c f(y) dy, via the tail identity
        int f = A(Phi_inv(c)) - A(xbar) + (1/(r-mu)) int y^{1-n} phi'."""
        key = (float(c), float(xbar))
        if key in self._coef_cache:
            return self._coef_cache[key]
        xc = float(self.Phi_inv(c))
        val = self.A(xc) + self._phi_deriv_integral(xbar, xc) / self.rmu
        self._coef_cache[key] = val
        return val

    def value(self, c: float, x: float, xbar: float) -> float:
        """The producer's value function w(c, x, xbar)."""
        reg = self.region(c, x, xbar)
        particular = c**self.alpha * x * float(self.phi_fn.phi(xbar)) / self.rmu
        if reg in ("C3", "S2"):
            return c**self.alpha * self._outer_coef(c, xbar) * x**self.n + particular
        if reg in ("C2", "S1"):
            return self.B(c, xbar) * x**self.n + particular
        # C1: jump to the boundary capability Gamma(x, xbar), pay k per unit
        g = float(self.Gamma(x, xbar))
        w_bdry = (
            self.B(g, xbar) * x**self.n
            + g**self.alpha * x * float(self.phi_fn.phi(xbar)) / self.rmu
        )
        return w_bdry - self.k * (g - c)

    # -- verification hooks ----------------------------------------------------

    def hjb_residual(
        self, c: float, x: float, xbar: float, h_rel: float = 1e-4
    ) -> HJBResidual:
        """Finite-difference residuals of the dynamic programming equation.

        pde_residual = 0.5 sigma^2 x^2 w_xx + mu x w_x - r w + c^alpha x phi,
        with derivatives from central differences whose stencil is shrunk
        until it stays inside one region; gradient_slack = w_c - k likewise.
        """
        reg = self.region(c, x, xbar)
        sig, mu = self.market.sigma, self.market.mu
        w0 = self.value(c, x, xbar)

        w_x, w_xx = self._deriv12(
            lambda xv: self.value(c, xv, xbar),
            w0,
            x,
            h_rel * x,
            lambda pts: all(0 < xv <= xbar for xv in pts)
            and self._same_region(reg, c, tuple(pts), xbar),
        )
        scale = c**self.alpha * x * float(self.phi_fn.phi(xbar))
        pde = 0.5 * sig**2 * x**2 * w_xx + mu * x * w_x - self.r * w0 + scale

        w_c, _ = self._deriv12(
            lambda cv: self.value(cv, x, xbar),
            w0,
            c,
            h_rel * c,
            lambda pts: all(cv > 0 for cv in pts)
            and self._same_region(reg, tuple(pts), x, xbar),
        )

        boundary = None
        if x >= 0.99 * xbar and c >= float(self.Phi(xbar)) * (1.0 - 1e-12):
            hb = h_rel * xbar
            # one-sided in xbar (xbar can only move up while x stays put)
            w1 = self.value(c, x, xbar + hb)
            w2 = self.value(c, x, xbar + 2.0 * hb)
            boundary = (-3.0 * w0 + 4.0 * w1 - w2) / (2.0 * hb)

        return HJBResidual(
            region=reg,
            pde_residual=float(pde),
            pde_scale=float(scale),
            gradient_slack=float(w_c - self.k),
            boundary_slack=None if boundary is None else float(boundary),
        )

    def _same_region(self, reg, c, x, xbar) -> bool:
        group = {"C1": "C1", "S1": "C2", "C2": "C2", "S2": "C3", "C3": "C3"}
        cs = c if isinstance(c, tuple) else (c,)
        xs = x if isinstance(x, tuple) else (x,)
        for ci in cs:
            for xi in xs:
                if ci <= 0 or not (0 < xi <= xbar):
                    return False
                if group[self.region(ci, xi, xbar)] != group[reg]:
                    return False
        return True

    @staticmethod
    def _deriv12(f, f0, z0, h0, ok):
        """First and second derivative of f at z0 by finite differences.

        Tries a central stencil first; if either side is invalid or lands
        in a different region (per the `ok` predicate), falls back to
        second-order one-sided stencils, shrinking the step as needed.
        """
        h = h0
        for _ in range(12):
            if ok((z0 - h, z0 + h)):
                fp, fm = f(z0 + h), f(z0 - h)
                return (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / h**2
            h *= 0.25
        for sgn in (-1.0, 1.0):
            h = h0
            for _ in range(12):
                zs = (z0 + sgn * h, z0 + 2 * sgn * h, z0 + 3 * sgn * h)
                if ok(zs):
                    f1, f2, f3 = (f(z) for z in zs)
                    d1 = sgn * (
                        -11.0 * f0 / 6.0 + 3.0 * f1 - 1.5 * f2 + f3 / 3.0
                    ) / h
                    d2 = (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / h**2
                    return d1, d2
                h *= 0.25
        raise NumericalError("stencil cannot avoid a boundary surface")

    def smooth_pasting_check(self, c: float, xbar: float, h_rel: float = 1e-5) -> dict:
        """Boundary matching at x = G(c, xbar) and on the diagonal.

        Returns a report with the finite-difference gradient checks
        (w_c -> k, w_cx -> 0 at the investment boundary) and the analytic
        residuals of the three boundary equations pinning A and f.
        """
        g = float(self.G(c, xbar))
        if g > xbar:
            raise ParameterError("G(c, xbar) > xbar: pick c < Phi(xbar)")
        hc = h_rel * c
        w_c = (self.value(c + hc, g, xbar) - self.value(c - hc, g, xbar)) / (2.0 * hc)
        hx = h_rel * g

        def wc_at(xv):
            return (
                self.value(c + hc, xv, xbar) - self.value(c - hc, xv, xbar)
            ) / (2.0 * hc)

        w_cx = (wc_at(g) - wc_at(g - hx)) / hx  # one-sided from inside

        phixb = float(self.Phi(xbar))
        a_val = self.A(xbar)
        f_phi = self.f(phixb)
        common = (
            phixb ** (self.alpha - 1.0)
            * (self.alpha * a_val + phixb * f_phi)
            * xbar**self.n
        )
        part = (
            self.alpha
            / self.rmu
            * phixb ** (self.alpha - 1.0)
            * xbar
            * float(self.phi_fn.phi(xbar))
        )
        fb1 = common + part - self.k
        fb2 = self.n * common + part

        # diagonal matching of the xbar-derivative
        ha = h_rel * xbar
        a_p = self.A(xbar * (1.0 + ha / xbar))
        a_m = self.A(xbar * (1.0 - ha / xbar))
        a_prime = (a_p - a_m) / (2.0 * ha)
        fb3 = (a_prime - f_phi * float(self.Phi_deriv(xbar))) * xbar**self.n + (
            xbar * float(self.phi_fn.phi_deriv(xbar)) / self.rmu
        )
        fb3_scale = max(
            abs(a_prime) * xbar**self.n,
            abs(xbar * float(self.phi_fn.phi_deriv(xbar))) / self.rmu,
            1e-300,
        )
        return {
            "w_c_at_G": float(w_c),
            "w_c_rel_err": abs(w_c - self.k) / self.k,
            "w_cx_at_G": float(w_cx),
            "fb1_residual": float(fb1),
            "fb2_residual": float(fb2),
            "fb2_rel": abs(fb2) / self.k,
            "fb3_residual": float(fb3),
            "fb3_rel": abs(fb3) / fb3_scale,
        }
