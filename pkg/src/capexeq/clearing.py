"""Aggregation operator, equilibrium price functionals and asymptotics.

The central object is the aggregation operator

    I[X](z) = ((1+beta) * sum_i w_i lam_i (c_i^a_i v X_i(z)^a_i)) ** (-gamma)

applied to families of monotone expansion rules X_i.  In equilibrium each
rule is the power law  Psi_i(pbar) = K_i * pbar ** ((1+beta)/(1-alpha_i)),
which makes psi* = I[Psi*], h(pbar) = pbar^(1+beta)/psi*(pbar) and
phi* = psi* o h^inv evaluable in closed form per atom: the only numerical
step is the monotone inversion of h, done segment by segment between the
activation prices where producers start expanding.

All evaluators accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .population import (
    DerivedMarket,
    ParameterError,
    ProducerType,
    ValidationReport,
    alpha_bar,
    investment_coefficient,
    kappa0,
    validate_assumptions,
)


class NumericalError(RuntimeError):
    """A numerical contract failed (bracket expansion, fixed point, ...)."""


# ---------------------------------------------------------------------------
# Strategy families
# ---------------------------------------------------------------------------


class PowerLawStrategy:
    """Monotone expansion rule  X(z) = coef * z**exponent,  exponent > 0."""

    def __init__(self, coef: float, exponent: float):
        if coef <= 0 or exponent <= 0:
            raise ParameterError("power-law strategy needs coef > 0, exponent > 0")
        self.coef = coef
        self.exponent = exponent
        self.exact_derivative = True

    def value(self, z):
        return self.coef * np.asarray(z, dtype=float) ** self.exponent

    def deriv_left(self, z):
        z = np.asarray(z, dtype=float)
        return self.coef * self.exponent * z ** (self.exponent - 1.0)

    def activation(self, c: float) -> float:
        """Level z at which X(z) = c."""
        return (c / self.coef) ** (1.0 / self.exponent)


class TabulatedStrategy:
    """Strictly increasing tabulated rule, linear interpolation in between.

    Left derivatives come from the segment slope to the left of the query
    point, so kinks follow the left-derivative convention.
    """

    def __init__(self, z_grid: np.ndarray, values: np.ndarray):
        z = np.asarray(z_grid, dtype=float)
        v = np.asarray(values, dtype=float)
        if z.ndim != 1 or z.shape != v.shape or z.size < 2:
            raise ParameterError("tabulated strategy needs matching 1-d grids")
        if not (np.all(np.diff(z) > 0) and np.all(np.diff(v) > 0)):
            raise ParameterError("tabulated strategy must be strictly increasing")
        if z[0] <= 0 or v[0] <= 0:
            raise ParameterError("tabulated strategy must be positive")
        self.z = z
        self.v = v
        self.exact_derivative = False

    def value(self, z):
        z = np.asarray(z, dtype=float)
        # extend with the edge-segment power laws so limits 0 and inf hold
        lo_s = math.log(self.v[1] / self.v[0]) / math.log(self.z[1] / self.z[0])
        hi_s = math.log(self.v[-1] / self.v[-2]) / math.log(self.z[-1] / self.z[-2])
        out = np.interp(z, self.z, self.v)
        below = z < self.z[0]
        above = z > self.z[-1]
        if np.any(below):
            out = np.where(below, self.v[0] * (z / self.z[0]) ** lo_s, out)
        if np.any(above):
            out = np.where(above, self.v[-1] * (z / self.z[-1]) ** hi_s, out)
        return out

    def deriv_left(self, z):
        z = np.asarray(z, dtype=float)
        idx = np.clip(np.searchsorted(self.z, z, side="left"), 1, self.z.size - 1)
        slope = (self.v[idx] - self.v[idx - 1]) / (self.z[idx] - self.z[idx - 1])
        return slope

    def activation(self, c: float) -> float:
        return float(np.interp(c, self.v, self.z))


Strategy = PowerLawStrategy | TabulatedStrategy


def aggregate_I(
    family: Sequence[Strategy],
    population: Sequence[ProducerType],
    beta: float,
    gamma: float,
    z,
):
    """Evaluate the aggregation operator I[X] at capability level(s) z."""
    if len(population) == 0:
        raise ParameterError("population: must be non-empty")
    if len(family) != len(population):
        raise ParameterError("family and population must have equal length")
    z = np.asarray(z, dtype=float)
    total = np.zeros_like(z)
    for strat, p in zip(family, population):
        xv = np.where(z > 0, strat.value(np.maximum(z, 1e-300)), 0.0)
        total = total + p.weight * p.lam * np.maximum(p.c**p.alpha, xv**p.alpha)
    return ((1.0 + beta) * total) ** (-gamma)


class AggregateDerivative(NamedTuple):
    value: np.ndarray | float
    exact: bool  # False when a tabulated left-difference quotient was used


def aggregate_I_derivative(
    family: Sequence[Strategy],
    population: Sequence[ProducerType],
    beta: float,
    gamma: float,
    z,
) -> AggregateDerivative:
    """Left derivative of I[X]:  -gamma(1+beta) chi^((1+gamma)/gamma) *
    sum_i w_i lam_i a_i 1{c_i < X_i(z)} X_i^(a_i - 1) X_i'."""
    chi = aggregate_I(family, population, beta, gamma, z)
    z = np.asarray(z, dtype=float)
    total = np.zeros_like(z)
    exact = True
    for strat, p in zip(family, population):
        xv = strat.value(z)
        active = p.c < xv
        dx = strat.deriv_left(z)
        exact = exact and strat.exact_derivative
        total = total + np.where(
            active, p.weight * p.lam * p.alpha * xv ** (p.alpha - 1.0) * dx, 0.0
        )
    value = -gamma * (1.0 + beta) * chi ** ((1.0 + gamma) / gamma) * total
    return AggregateDerivative(value=value, exact=exact)


# ---------------------------------------------------------------------------
# Equilibrium profile
# ---------------------------------------------------------------------------


class SlopeFit(NamedTuple):
    slope: float
    halfwidth: float  # 2 x standard error of the fitted slope


def asymptotic_slope(z, f, fit_range: tuple[float, float] | None = None) -> SlopeFit:
    """Least-squares slope of ln f against ln z inside fit_range.

    Requires at least 8 points spanning at least two decades.
    """
    z = np.asarray(z, dtype=float)
    f = np.asarray(f, dtype=float)
    if fit_range is not None:
        mask = (z >= fit_range[0]) & (z <= fit_range[1])
        z, f = z[mask], f[mask]
    if z.size < 8 or z.max() < 100.0 * z.min():
        raise ParameterError("slope fit needs >= 8 points over >= 2 decades")
    lx, ly = np.log(z), np.log(f)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    dof = max(z.size - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / float(((lx - lx.mean()) ** 2).sum()))
    return SlopeFit(slope=float(slope), halfwidth=2.0 * se)


class EquilibriumProfile:
    """Equilibrium price functionals for a finite-atom population.

    Exposes closed-form evaluators psi, h, h_inv, phi, u = xbar*phi and the
    per-producer thresholds Phi_i, plus tabulated grids for export.  Because
    u(xbar) = h_inv(xbar)**(1+beta), the inverse u_inv is closed form.
    """

    def __init__(
        self,
        population: Sequence[ProducerType],
        market: DerivedMarket,
        pbar_min: float = 1e-3,
        pbar_max: float = 1e7,
        n_nodes: int = 201,
        fixed_point_tol: float = 1e-8,
        validation: ValidationReport | None = None,
    ):
        if validation is None:
            validation = validate_assumptions(list(population), market)
        if not validation.passed:
            raise ParameterError(
                "population fails standing assumptions: "
                + "; ".join(
                    r for pc in validation.producer_checks for r in pc.reasons
                )
            )
        self.population = list(population)
        self.market = market
        self.validation = validation
        self.beta = market.beta
        self.gamma = market.gamma
        self.kappa0 = kappa0(self.population, self.beta)
        self.kappa0_gamma = self.kappa0 ** (-self.gamma)
        self.alpha_bar = alpha_bar(self.population)

        self.K = np.array([investment_coefficient(p, market) for p in self.population])
        self.alpha = np.array([p.alpha for p in self.population])
        self.wlam = np.array([p.weight * p.lam for p in self.population])
        self.c = np.array([p.c for p in self.population])
        self.e = (1.0 + self.beta) / (1.0 - self.alpha)  # Psi_i exponent
        # price above which producer i expands: Psi_i(a_i) = c_i
        self.activation_pbar = (self.c / self.K) ** (1.0 / self.e)
        self.activation_xbar = self.h(self.activation_pbar)

        # asymptotic exponents (depend on alpha_bar only)
        ab, g = self.alpha_bar, self.gamma
        self.psi_tail_slope = -ab * (1.0 + self.beta) * g / (1.0 - ab)
        self.phi_tail_slope = -ab * g / (1.0 - ab + ab * g)
        self.u_tail_slope = (1.0 - ab) / (1.0 - ab + ab * g)
        #: phi ~ x**(-tail_exponent) for large x
        self.tail_exponent = -self.phi_tail_slope
        self.phi_max = self.kappa0_gamma

        self._build_grid(pbar_min, pbar_max, n_nodes)
        self._verify_fixed_point(fixed_point_tol)

    # -- closed-form evaluators --------------------------------------------

    def Psi(self, pbar, i: int):
        """Equilibrium expansion rule of atom i as a function of max price."""
        return self.K[i] * np.asarray(pbar, dtype=float) ** self.e[i]

    def _supply_sum(self, pbar):
        pbar = np.asarray(pbar, dtype=float)[..., None]
        psi_i = self.K * pbar**self.e
        terms = self.wlam * np.maximum(self.c**self.alpha, psi_i**self.alpha)
        return (1.0 + self.beta) * terms.sum(axis=-1)

    def psi(self, pbar):
        """psi*(pbar) = I[Psi*](pbar); equals kappa0**(-gamma) left of the
        first activation price."""
        return self._supply_sum(pbar) ** (-self.gamma)

    def psi_deriv(self, pbar):
        """Left derivative of psi* (kinks at activation prices excluded on
        the left, matching the left-derivative convention)."""
        pbar_a = np.asarray(pbar, dtype=float)
        p = pbar_a[..., None]
        psi_i = self.K * p**self.e
        active = psi_i > self.c  # strict: left derivative at the kink
        d = np.where(
            active,
            self.wlam
            * self.alpha
            * psi_i ** (self.alpha - 1.0)
            * self.K
            * self.e
            * p ** (self.e - 1.0),
            0.0,
        ).sum(axis=-1)
        chi = self.psi(pbar_a)
        return -self.gamma * (1.0 + self.beta) * chi ** ((1.0 + self.gamma) / self.gamma) * d

    def h(self, pbar):
        pbar = np.asarray(pbar, dtype=float)
        return pbar ** (1.0 + self.beta) / self.psi(pbar)

    def h_deriv(self, pbar):
        pbar = np.asarray(pbar, dtype=float)
        ps = self.psi(pbar)
        return ((1.0 + self.beta) * pbar**self.beta * ps
                - pbar ** (1.0 + self.beta) * self.psi_deriv(pbar)) / ps**2

    def h_inv(self, xbar):
        """Invert the strictly increasing h segment by segment.

        Segments whose supply sum is a constant or a single power of pbar
        invert in closed form; mixed segments use bisection in log space
        followed by Newton polishing (relative tolerance ~1e-15).
        """
        xbar = np.asarray(xbar, dtype=float)
        scalar = xbar.ndim == 0
        x = np.atleast_1d(xbar).astype(float)
        if np.any(x <= 0):
            raise ParameterError("h_inv requires xbar > 0")
        out = np.empty_like(x)

        order = np.argsort(self.activation_pbar)
        act_p = self.activation_pbar[order]
        act_x = self.h(act_p)
        seg = np.searchsorted(act_x, x, side="left")

        for s in range(act_p.size + 1):
            mask = seg == s
            if not np.any(mask):
                continue
            xs = x[mask]
            active = order[:s]
            inactive = order[s:]
            const = (1.0 + self.beta) * float(
                (self.wlam[inactive] * self.c[inactive] ** self.alpha[inactive]).sum()
            )
            exps = self.alpha[active] * self.e[active]
            lo = act_p[s - 1] if s > 0 else None
            hi = act_p[s] if s < act_p.size else None
            if active.size == 0:
                # h = const**gamma * pbar**(1+beta)
                out[mask] = (xs / const**self.gamma) ** (1.0 / (1.0 + self.beta))
            elif const == 0.0 and np.unique(exps).size == 1:
                coef = (1.0 + self.beta) * float(
                    (self.wlam[active]
                     * (self.K[active] ** self.alpha[active])).sum()
                )
                # h = coef**gamma * pbar**(1+beta+gamma*exps)
                power = 1.0 + self.beta + self.gamma * exps[0]
                out[mask] = (xs / coef**self.gamma) ** (1.0 / power)
            else:
                out[mask] = self._h_inv_bisect(xs, lo, hi)
        out = np.minimum(np.maximum(out, 1e-300), 1e300)
        return float(out[0]) if scalar else out

    def _h_inv_bisect(self, x, lo, hi):
        if lo is None:
            lo = float(np.min(x)) ** (1.0 / (1.0 + self.beta)) * 1e-8
        if hi is None:
            hi = max(float(np.max(x)), lo * 2.0)
            for _ in range(400):
                if self.h(hi) >= np.max(x):
                    break
                hi *= 2.0
            else:
                raise NumericalError("h_inv bracket expansion failed")
        llo = np.full(x.shape, math.log(lo))
        lhi = np.full(x.shape, math.log(hi))
        for _ in range(64):
            mid = 0.5 * (llo + lhi)
            too_low = self.h(np.exp(mid)) < x
            llo = np.where(too_low, mid, llo)
            lhi = np.where(too_low, lhi, mid)
        p = np.exp(0.5 * (llo + lhi))
        for _ in range(3):  # Newton polish; h smooth inside a segment
            p = np.clip(p - (self.h(p) - x) / self.h_deriv(p), lo, hi)
        return p

    def phi(self, xbar):
        return self.psi(self.h_inv(xbar))

    def phi_deriv(self, xbar):
        pbar = self.h_inv(xbar)
        return self.psi_deriv(pbar) / self.h_deriv(pbar)

    def u(self, xbar):
        """u(xbar) = xbar * phi(xbar) = h_inv(xbar)**(1+beta)."""
        return self.h_inv(xbar) ** (1.0 + self.beta)

    def u_inv(self, v):
        """Inverse of u: closed form, u_inv(v) = h(v**(1/(1+beta)))."""
        v = np.asarray(v, dtype=float)
        return self.h(v ** (1.0 / (1.0 + self.beta)))

    def u_deriv(self, xbar):
        xbar = np.asarray(xbar, dtype=float)
        return self.phi(xbar) + xbar * self.phi_deriv(xbar)

    def Phi(self, xbar, i: int):
        """Equilibrium threshold Phi_i*(xbar) = K_i (xbar phi(xbar))^(1/(1-a_i))."""
        return self.K[i] * self.u(xbar) ** (1.0 / (1.0 - self.alpha[i]))

    def kink_points(self) -> np.ndarray:
        """xbar locations where phi has kinks (activation images under h)."""
        return np.sort(self.activation_xbar)

    # -- tabulation and verification ----------------------------------------

    def _build_grid(self, pbar_min, pbar_max, n_nodes):
        if not (0 < pbar_min < pbar_max) or n_nodes < 8:
            raise ParameterError("grid: need 0 < pbar_min < pbar_max, n_nodes >= 8")
        grid = np.geomspace(pbar_min, pbar_max, n_nodes)
        acts = self.activation_pbar[
            (self.activation_pbar > pbar_min) & (self.activation_pbar < pbar_max)
        ]
        self.pbar_grid = np.unique(np.concatenate([grid, acts]))
        self.psi_grid = self.psi(self.pbar_grid)
        self.h_grid = self.h(self.pbar_grid)
        self.xbar_grid = self.h_grid.copy()
        self.phi_grid = self.phi(self.xbar_grid)
        self.u_grid = self.xbar_grid * self.phi_grid
        self.Phi_grid = np.stack(
            [self.Phi(self.xbar_grid, i) for i in range(len(self.population))]
        )

    def _verify_fixed_point(self, tol: float):
        # I[Phi*](xbar) evaluated directly from the tabulated thresholds
        terms = self.wlam[:, None] * np.maximum(
            (self.c**self.alpha)[:, None],
            self.Phi_grid ** self.alpha[:, None],
        )
        lhs = ((1.0 + self.beta) * terms.sum(axis=0)) ** (-self.gamma)
        resid = np.abs(lhs / self.phi_grid - 1.0)
        self.fixed_point_residual = float(resid.max())
        if self.fixed_point_residual > tol:
            worst = int(resid.argmax())
            raise NumericalError(
                f"fixed point I[Phi*] = phi* failed: residual "
                f"{self.fixed_point_residual:.3e} at xbar = {self.xbar_grid[worst]:.6g}"
            )


def equilibrium_psi(population: Sequence[ProducerType], market: DerivedMarket):
    """The function pbar -> psi*(pbar) for the equilibrium strategy family."""
    prof = EquilibriumProfile(population, market)
    return prof.psi


def equilibrium_phi(
    population: Sequence[ProducerType],
    market: DerivedMarket,
    pbar_min: float = 1e-3,
    pbar_max: float = 1e7,
    n_nodes: int = 201,
) -> EquilibriumProfile:
    """Construct and verify the full equilibrium profile."""
    return EquilibriumProfile(population, market, pbar_min, pbar_max, n_nodes)


def h_of(psi, beta: float, pbar):
    """h(pbar) = pbar**(1+beta) / psi(pbar) for a user-supplied psi."""
    pbar = np.asarray(pbar, dtype=float)
    return pbar ** (1.0 + beta) / psi(pbar)


def h_inverse(psi, beta: float, xbar: float, rtol: float = 1e-10) -> float:
    """Solve h(p) = xbar for a generic non-increasing psi by bracketed
    bisection on the monotone h; relative tolerance on the argument."""
    if xbar <= 0:
        raise ParameterError("h_inverse requires xbar > 0")
    f = lambda p: h_of(psi, beta, p) - xbar
    lo, hi = 1.0, 1.0
    for _ in range(600):
        if f(lo) <= 0:
            break
        lo *= 0.5
    else:
        raise NumericalError(f"h_inverse: no lower bracket for xbar={xbar}")
    for _ in range(600):
        if f(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise NumericalError(f"h_inverse: no upper bracket for xbar={xbar}")
    while hi - lo > rtol * hi:
        mid = math.sqrt(lo * hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
