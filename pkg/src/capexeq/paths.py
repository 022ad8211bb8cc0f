"""Monte Carlo simulation of demand paths, strategies, and prices.

Demand follows a geometric Brownian motion simulated by its exact
lognormal transition, so the only discretization error in payoff
estimates comes from the time quadrature, not the dynamics.  The running
maximum is tracked either from the grid observations ("discrete") or
with intra-step Brownian-bridge maxima ("bridge").

Paths are generated in fixed-size batches with independently seeded
generators keyed by (seed, batch_index).  Estimates reduce over batches
in index order, so results are byte-identical regardless of how many
worker threads are used, and strategies evaluated through the same
estimator share paths (common random numbers).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .population import DerivedMarket, ParameterError

#: number of paths drawn per RNG stream; fixed so that estimates do not
#: depend on how work is split across threads
BATCH_SIZE = 4096


@dataclass(frozen=True)
class SimConfig:
    """Time grid and sampling plan for one Monte Carlo run."""

    T: float
    n_steps: int
    n_paths: int
    seed: int
    scheme: str = "bridge"  # "bridge" | "discrete"
    threads: int = 1

    def __post_init__(self):
        if self.T <= 0 or self.n_steps < 1 or self.n_paths < 1:
            raise ParameterError("need T > 0, n_steps >= 1, n_paths >= 1")
        if self.scheme not in ("bridge", "discrete"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")


@dataclass
class PathBatch:
    """One batch of simulated paths on a common time grid."""

    t: np.ndarray  # (n_steps+1,)
    X: np.ndarray  # (n, n_steps+1) demand factor
    M: np.ndarray  # (n, n_steps+1) running max of X (scheme-dependent)
    dW: np.ndarray  # (n, n_steps) Brownian increments


def n_batches(n_paths: int) -> int:
    return (n_paths + BATCH_SIZE - 1) // BATCH_SIZE


def simulate_batch(
    market: DerivedMarket, x0: float, cfg: SimConfig, batch_index: int
) -> PathBatch:
    """Simulate one batch of exact GBM paths with running maxima.

    The generator is seeded with (seed, batch_index); a full batch is
    always drawn and then truncated, so path i is the same whether it is
    requested alone or as part of a larger run.
    """
    if x0 <= 0:
        raise ParameterError("x0 must be > 0")
    n_full = n_batches(cfg.n_paths)
    if not (0 <= batch_index < n_full):
        raise ParameterError("batch_index out of range")
    n = min(BATCH_SIZE, cfg.n_paths - batch_index * BATCH_SIZE)
    rng = np.random.default_rng([cfg.seed, batch_index])
    dt = cfg.T / cfg.n_steps
    mu, sig = market.mu, market.sigma

    Z = rng.standard_normal((BATCH_SIZE, cfg.n_steps))
    dW = math.sqrt(dt) * Z
    lnX = np.empty((BATCH_SIZE, cfg.n_steps + 1))
    lnX[:, 0] = math.log(x0)
    np.cumsum((mu - 0.5 * sig**2) * dt + sig * dW, axis=1, out=lnX[:, 1:])
    lnX[:, 1:] += math.log(x0)
    X = np.exp(lnX)

    if cfg.scheme == "bridge":
        # conditional max of each step's Brownian bridge, in log space
        U = rng.random((BATCH_SIZE, cfg.n_steps))
        a = lnX[:, :-1]
        b = lnX[:, 1:]
        ln_step_max = 0.5 * (
            a + b + np.sqrt((b - a) ** 2 - 2.0 * sig**2 * dt * np.log(U))
        )
        M = np.empty_like(lnX)
        M[:, 0] = math.log(x0)
        np.maximum.accumulate(ln_step_max, axis=1, out=M[:, 1:])
        np.maximum(M[:, 1:], math.log(x0), out=M[:, 1:])
        M = np.exp(M)
    else:
        M = np.maximum.accumulate(X, axis=1)

    t = np.linspace(0.0, cfg.T, cfg.n_steps + 1)
    return PathBatch(t=t, X=X[:n], M=M[:n], dW=dW[:n])


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


def threshold_strategy(solution, c0: float, xbar: float, scale: float = 1.0):
    """Barrier strategy keeping capability at `scale` times the investment
    target: C_t = c0 ∨ scale * Gamma(M_t, xbar ∨ M_t).

    scale = 1 is the optimal strategy; other scales give admissible
    suboptimal comparators.  The result is nondecreasing by construction.
    """

    def realize(batch: PathBatch) -> np.ndarray:
        xt = np.maximum(batch.M, xbar)
        C = np.maximum(c0, scale * solution.Gamma(batch.M, xt))
        np.maximum.accumulate(C, axis=1, out=C)
        return C

    return realize


def constant_strategy(c0: float):
    """Never invest: C_t = c0."""

    def realize(batch: PathBatch) -> np.ndarray:
        return np.full_like(batch.X, c0)

    return realize


# ---------------------------------------------------------------------------
# Payoff estimation
# ---------------------------------------------------------------------------


@dataclass
class PayoffEstimate:
    mean: float
    se: float
    n_paths: int
    tail: float  # estimate of the truncated post-horizon value

    @property
    def halfwidth2(self) -> float:
        return 2.0 * self.se


def _batch_payoffs(
    batch: PathBatch, C: np.ndarray, phi_fn, xbar: float, alpha: float,
    k: float, r: float, rmu: float, c0: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Discounted payoff of capability paths C on one batch.

    Revenue flow C^alpha * X * phi(xbar ∨ M) by trapezoid in t; expansion
    cost k dC as a left-endpoint Stieltjes sum plus the time-0 jump from
    c0 to C_0.  Returns (payoffs, tail proxies) per path.
    """
    if np.any(np.diff(C, axis=1) < -1e-12 * np.abs(C[:, :-1])) or np.any(
        C[:, 0] < c0 * (1 - 1e-12)
    ):
        raise ParameterError("capability paths must be nondecreasing from c0")
    t = batch.t
    xt = np.maximum(batch.M, xbar)
    flow = C**alpha * batch.X * np.asarray(phi_fn.phi(xt))
    disc = np.exp(-r * t)
    integrand = disc * flow
    J = np.trapezoid(integrand, t, axis=1)
    J -= k * ((C[:, 0] - c0) + np.sum(disc[:-1] * np.diff(C, axis=1), axis=1))
    tail = integrand[:, -1] / rmu  # e^{-rT} C_T^a X_T phi / (r - mu)
    return J, tail


@dataclass
class PayoffEstimator:
    """Streams path batches and evaluates strategies on shared paths."""

    market: DerivedMarket
    phi_fn: object  # phi(), used for revenue flow
    cfg: SimConfig
    x0: float
    xbar: float
    alpha: float
    k: float
    r: float
    c0: float
    _cache: dict = field(default_factory=dict, repr=False)

    def estimate(self, strategies: dict) -> dict[str, PayoffEstimate]:
        """Estimate E[J] for each named strategy with common random numbers.

        Batches are processed (possibly in parallel) and reduced in index
        order, so the result does not depend on cfg.threads.
        """
        rmu = self.r - self.market.mu
        nb = n_batches(self.cfg.n_paths)
        names = list(strategies)

        def work(b):
            batch = simulate_batch(self.market, self.x0, self.cfg, b)
            out = {}
            for name in names:
                C = strategies[name](batch)
                J, tail = _batch_payoffs(
                    batch, C, self.phi_fn, self.xbar, self.alpha,
                    self.k, self.r, rmu, self.c0,
                )
                out[name] = (J.sum(), np.sum(J * J), tail.sum(), len(J))
            return out

        if self.cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.threads) as ex:
                results = list(ex.map(work, range(nb)))
        else:
            results = [work(b) for b in range(nb)]

        estimates = {}
        for name in names:
            s = s2 = tl = 0.0
            cnt = 0
            for res in results:  # fixed batch order: deterministic reduce
                a, b2, tb, nb_paths = res[name]
                s += a
                s2 += b2
                tl += tb
                cnt += nb_paths
            mean = s / cnt
            var = max(s2 / cnt - mean * mean, 0.0) * cnt / max(cnt - 1, 1)
            estimates[name] = PayoffEstimate(
                mean=mean,
                se=math.sqrt(var / cnt),
                n_paths=cnt,
                tail=tl / cnt,
            )
        return estimates


# ---------------------------------------------------------------------------
# Prices along a path
# ---------------------------------------------------------------------------


def price_paths(profile, X: np.ndarray, M: np.ndarray, xbar: float):
    """Spot price P and its running max Pbar along simulated paths.

    P_t = (X_t * phi(xbar ∨ M_t))^{1/(1+beta)}; Pbar_t inverts the
    price-max map at the demand running max.
    """
    xt = np.maximum(M, xbar)
    P = (X * profile.phi(xt)) ** (1.0 / (1.0 + profile.beta))
    Pbar = profile.h_inv(xt)
    return P, Pbar


def clearing_residual(profile, X: np.ndarray, M: np.ndarray, xbar: float):
    """Relative market-clearing error: demand X^{1/gamma} P^{-delta}
    against aggregate supply at the equilibrium capabilities c ∨ Phi_i."""
    xt = np.maximum(M, xbar)
    P, _ = price_paths(profile, X, M, xbar)
    beta = profile.beta
    gamma = profile.market.gamma
    delta = (1.0 + beta - gamma * beta) / gamma  # inverts gamma=(1+b)/(d+b)
    demand = X ** (1.0 / gamma) * P ** (-delta)
    supply = np.zeros_like(P)
    for i in range(len(profile.c)):
        cap = np.maximum(profile.c[i], profile.Phi(xt, i))
        supply += profile.wlam[i] * cap ** profile.alpha[i]
    supply *= (1.0 + beta) * P**beta
    return np.abs(demand - supply) / np.abs(demand)


class PriceDynamicsCheck(NamedTuple):
    max_defect: float  # worst one-step defect over all paths and steps
    mean_path_max: float  # per-path max defect, averaged over paths


def price_dynamics_residual(
    profile, t: np.ndarray, X: np.ndarray, M: np.ndarray,
    dW: np.ndarray, xbar: float,
) -> PriceDynamicsCheck:
    """One-step defects of the price SDE along simulated paths.

    The log price increment should equal the model drift plus the
    reflection term driven by dPbar plus the Brownian term.  Off the
    running max the defect vanishes identically (exact increments); on it
    the defect is second order in the Pbar increment, so both statistics
    shrink at order dt under grid refinement.  mean_path_max averages out
    the sampling noise of the single worst step and is the quantity to
    use in refinement ratios.
    """
    beta = profile.beta
    mu, sig = profile.market.mu, profile.market.sigma
    dt = t[1] - t[0]
    P, Pbar = price_paths(profile, X, M, xbar)
    lnP = np.log(P)
    psi_l = profile.psi(Pbar[:, :-1])
    dpsi_l = profile.psi_deriv(Pbar[:, :-1])
    rhs = (
        (mu - 0.5 * sig**2) / (1.0 + beta) * dt
        + dpsi_l / psi_l / (1.0 + beta) * np.diff(Pbar, axis=1)
        + sig / (1.0 + beta) * dW
    )
    defect = np.abs(np.diff(lnP, axis=1) - rhs)
    return PriceDynamicsCheck(
        max_defect=float(defect.max()),
        mean_path_max=float(defect.max(axis=1).mean()),
    )


def coarsen(t: np.ndarray, X: np.ndarray, M: np.ndarray, dW: np.ndarray, k: int):
    """Restrict paths to every k-th grid point, rebuilding the running max
    from the retained observations and summing Brownian increments."""
    tc = t[::k]
    Xc = X[:, ::k]
    Mc = np.maximum.accumulate(Xc, axis=1)
    dWc = dW.reshape(dW.shape[0], -1, k).sum(axis=2)
    return tc, Xc, Mc, dWc
