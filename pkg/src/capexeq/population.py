"""Producer population, market primitives and standing-assumption checks.

The market is a continuum of price-taking producers supplying one good.
Numerically the continuum is represented by finitely many weighted atoms:
each :class:`ProducerType` stands for a mass ``weight`` of identical small
producers, so every aggregate integral becomes a weighted sum.

Base demand is a geometric Brownian motion; the driving state of every
formula in this package is its power transform ``X = D**gamma`` with
``gamma = (1 + beta) / (delta + beta)``, which is again a GBM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ParameterError(ValueError):
    """A scenario parameter lies outside its admissible range."""


def _require(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ParameterError(f"{name}: {msg}")


@dataclass(frozen=True)
class ProducerType:
    """One weighted atom of the producer population.

    c       initial installed capability (> 0)
    alpha   production-cost exponent, in (0, 1)
    lam     production cost scale (> 0)
    k       cost per unit of capability expansion (> 0)
    r       producer's discount rate (> 0)
    weight  quadrature mass of the atom (> 0)
    """

    c: float
    alpha: float
    lam: float
    k: float
    r: float
    weight: float = 1.0
    name: str = ""

    def __post_init__(self):
        _require(self.c > 0, "c", "must be > 0")
        _require(0.0 < self.alpha < 1.0, "alpha", "must lie in (0, 1)")
        _require(self.lam > 0, "lambda", "must be > 0")
        _require(self.k > 0, "k", "must be > 0")
        _require(self.r > 0, "r", "must be > 0")
        _require(self.weight > 0, "weight", "must be > 0")


@dataclass(frozen=True)
class MarketParams:
    """Demand-side primitives: cost elasticity, price elasticity and the
    lognormal base demand ``D_t = D0 * exp(mu_tilde t + sigma_tilde W_t)``."""

    beta: float
    delta: float
    mu_tilde: float
    sigma_tilde: float
    D0: float

    def __post_init__(self):
        _require(self.beta > 0, "beta", "must be > 0")
        _require(self.delta > 0, "delta", "must be > 0")
        _require(self.sigma_tilde > 0, "sigma_tilde", "must be > 0")
        _require(self.D0 > 0, "D0", "must be > 0")


@dataclass(frozen=True)
class DerivedMarket:
    """The GBM ``X = D**gamma`` driving all equilibrium formulas.

    gamma = (1 + beta) / (delta + beta).  gamma = 1 (delta = 1) is allowed:
    every downstream formula remains well defined and reference scenarios
    use it.
    """

    beta: float
    gamma: float
    mu: float
    sigma: float
    X0: float

    def __post_init__(self):
        _require(self.beta > 0, "beta", "must be > 0")
        _require(0.0 < self.gamma <= 1.0, "gamma", "must lie in (0, 1]")
        _require(self.sigma > 0, "sigma", "must be > 0")
        _require(self.X0 > 0, "X0", "must be > 0")


def derive_market(params: MarketParams) -> DerivedMarket:
    """Map demand primitives to the induced GBM of ``X = D**gamma``.

    By Ito's rule applied to D**gamma:
        sigma = gamma * sigma_tilde
        mu    = gamma * mu_tilde + 0.5 * gamma**2 * sigma_tilde**2
    """
    gamma = (1.0 + params.beta) / (params.delta + params.beta)
    return DerivedMarket(
        beta=params.beta,
        gamma=gamma,
        mu=gamma * params.mu_tilde + 0.5 * gamma**2 * params.sigma_tilde**2,
        sigma=gamma * params.sigma_tilde,
        X0=params.D0**gamma,
    )


def characteristic_roots(mu: float, sigma: float, r: float) -> tuple[float, float]:
    """Roots m < 0 < n of  0.5 sigma^2 l^2 + (mu - 0.5 sigma^2) l - r = 0."""
    _require(sigma > 0, "sigma", "must be > 0")
    _require(r > 0, "r", "must be > 0")
    b = mu / sigma**2 - 0.5
    disc = math.sqrt(b * b + 2.0 * r / sigma**2)
    n = -b + disc
    m = -b - disc
    return m, n


@dataclass(frozen=True)
class ProducerDerived:
    """Per-producer derived quantities: characteristic roots, the slack
    epsilon of the standing growth condition, and the investment
    coefficient K multiplying the optimal expansion power law."""

    m: float
    n: float
    epsilon: float
    K: float


def investment_coefficient(p: ProducerType, market: DerivedMarket) -> float:
    """K = (alpha (n-1) / ((r - mu) n k)) ** (1 / (1 - alpha)).

    The optimal expansion rule is ``C = c v K * pbar ** ((1+beta)/(1-alpha))``.
    Requires r > mu (equivalently n > 1).
    """
    _require(p.r > market.mu, "r", "must exceed the drift mu of X")
    _, n = characteristic_roots(market.mu, market.sigma, p.r)
    base = p.alpha * (n - 1.0) / ((p.r - market.mu) * n * p.k)
    return base ** (1.0 / (1.0 - p.alpha))


def alpha_bar(population: list[ProducerType]) -> float:
    """Essential sup of alpha over the (positively weighted) atoms."""
    _require(len(population) > 0, "population", "must be non-empty")
    return max(p.alpha for p in population if p.weight > 0)


def kappa0(population: list[ProducerType], beta: float) -> float:
    """Aggregate initial scale kappa0 = (1+beta) * sum_i w_i lam_i c_i^alpha_i."""
    _require(len(population) > 0, "population", "must be non-empty")
    return (1.0 + beta) * sum(p.weight * p.lam * p.c**p.alpha for p in population)


def producer_derived(p: ProducerType, market: DerivedMarket, abar: float) -> ProducerDerived:
    m, n = characteristic_roots(market.mu, market.sigma, p.r)
    eps = (n - 1.0) * (1.0 - p.alpha) / p.alpha - (1.0 - abar) / (
        1.0 - abar + abar * market.gamma
    )
    K = investment_coefficient(p, market) if p.r > market.mu else math.nan
    return ProducerDerived(m=m, n=n, epsilon=eps, K=K)


def production_rate(p: ProducerType, C: float, P: float, beta: float) -> float:
    """Profit-maximising output rate:  Q* = lam (1+beta) C^alpha P^beta."""
    _require(C > 0, "C", "must be > 0")
    _require(P > 0, "P", "must be > 0")
    return p.lam * (1.0 + beta) * C**p.alpha * P**beta


def production_payoff(p: ProducerType, C: float, P: float, beta: float) -> float:
    """Instantaneous payoff at the optimal output rate, normalized by lam.

    Maximizing Q*P - cost over Q gives lam * C^alpha * P^(1+beta); since the
    unit expansion cost is lam*k, the whole objective scales by lam and the
    control problem uses the normalized payoff C^alpha P^(1+beta).
    """
    _require(C > 0, "C", "must be > 0")
    _require(P > 0, "P", "must be > 0")
    q = production_rate(p, C, P, beta)
    return (q * P - production_cost(p, C, q, beta)) / p.lam


def production_cost(p: ProducerType, C: float, Q: float, beta: float) -> float:
    """Cost rate of producing at rate Q with capability C."""
    scale = beta / (p.lam ** (1.0 / beta) * (1.0 + beta) ** (1.0 + 1.0 / beta))
    return scale * Q ** (1.0 + 1.0 / beta) / C ** (p.alpha / beta)


#: Reject parameter sets this close to the removable singularity of the
#: middle-region value-function coefficient, which divides by n(1-alpha) - 1.
B_EXPR_SINGULARITY_TOL = 1e-8


@dataclass(frozen=True)
class ProducerCheck:
    name: str
    passed: bool
    reasons: tuple[str, ...]
    warnings: tuple[str, ...]
    derived: ProducerDerived


@dataclass(frozen=True)
class ValidationReport:
    """Report-based validation of the standing assumptions.

    ``passed`` reflects the standing assumptions only.  The proximity of
    n(1-alpha) to 1 is reported as a per-producer warning: it blocks the
    middle-region value-function formulas (see the control module) but not
    the equilibrium construction itself.
    """

    kappa0: float
    alpha_bar: float
    producer_checks: tuple[ProducerCheck, ...]
    passed: bool
    a2_integral_q1: float = field(default=math.nan)

    def to_dict(self) -> dict:
        return {
            "kappa0": self.kappa0,
            "alpha_bar": self.alpha_bar,
            "passed": self.passed,
            "a2_integral_q1": self.a2_integral_q1,
            "producers": [
                {
                    "name": pc.name,
                    "passed": pc.passed,
                    "reasons": list(pc.reasons),
                    "warnings": list(pc.warnings),
                    "m": pc.derived.m,
                    "n": pc.derived.n,
                    "epsilon": pc.derived.epsilon,
                    "K": pc.derived.K,
                }
                for pc in self.producer_checks
            ],
        }


def validate_assumptions(
    population: list[ProducerType], market: DerivedMarket
) -> ValidationReport:
    """Check the standing assumptions atom by atom; never raises.

    Per producer: r > mu (equivalently n > 1), epsilon > 0 where
    epsilon = (n-1)(1-alpha)/alpha - (1-abar)/(1-abar+abar*gamma),
    and the growth-condition integrand at q = 1 (finite automatically for
    atoms, reported for transparency).  Proximity of n(1-alpha) to 1 is
    flagged as a warning.
    """
    _require(len(population) > 0, "population", "must be non-empty")
    abar = alpha_bar(population)
    k0 = kappa0(population, market.beta)
    checks = []
    integral_q1 = 0.0
    for idx, p in enumerate(population):
        name = p.name or f"producer_{idx}"
        reasons: list[str] = []
        warnings: list[str] = []
        der = producer_derived(p, market, abar)
        if p.r <= market.mu:
            reasons.append(f"r_i <= mu ({p.r} <= {market.mu})")
        if der.epsilon <= 0:
            reasons.append(f"epsilon_i <= 0 ({der.epsilon})")
        if abs(der.n * (1.0 - p.alpha) - 1.0) < B_EXPR_SINGULARITY_TOL:
            warnings.append(
                "B-expr singularity: n(1-alpha) = 1; middle-region value "
                "formulas unavailable, perturb alpha to use them"
            )
        if abar >= 1.0:
            reasons.append("alpha_bar = 1 extremal case is unsupported")
        if p.r > market.mu:
            integral_q1 += p.weight * p.lam * (
                p.alpha * (der.n - 1.0) / ((p.r - market.mu) * der.n * p.k)
            ) ** (p.alpha / (1.0 - p.alpha))
        checks.append(
            ProducerCheck(
                name=name,
                passed=not reasons,
                reasons=tuple(reasons),
                warnings=tuple(warnings),
                derived=der,
            )
        )
    return ValidationReport(
        kappa0=k0,
        alpha_bar=abar,
        producer_checks=tuple(checks),
        passed=all(pc.passed for pc in checks),
        a2_integral_q1=integral_q1,
    )
