import numpy as np
import pytest

from capexeq.clearing import EquilibriumProfile
from capexeq.config import parse_scenario
from capexeq.population import MarketParams, ProducerType, derive_market

# Single-type benchmark scenario with fully hand-derivable closed forms:
# gamma = 1, mu = 1/2, sigma = 1, roots n = 2, m = -2, K = 1, kappa0 = 1,
# psi(pbar) = (1 v pbar^2)^{-1}, phi(xbar) = 1 ^ xbar^{-1/2},
# Phi(xbar) = xbar^2 for xbar <= 1 and xbar for xbar > 1,
# A(xbar) = -(1/6) xbar^{-3/2} for xbar > 1.
S1_DOC = {
    "name": "s1",
    "market": {"beta": 1.0, "delta": 1.0, "mu_tilde": 0.0,
               "sigma_tilde": 1.0, "D0": 1.0},
    "producers": [{"c": 1.0, "alpha": 0.5, "lam": 0.5,
                   "k": 1.0 / 6.0, "r": 2.0, "weight": 1.0, "name": "t1"}],
    "simulation": {"T": 4.5, "n_steps": 1000, "n_paths": 100000,
                   "seed": 7, "scheme": "bridge", "xbar0": 4.0},
}

# Same market with alpha nudged off the n(1-alpha) = 1 singularity so the
# middle-region value formulas are usable.
S1P_DOC = {
    **S1_DOC,
    "name": "s1-perturbed",
    "producers": [{**S1_DOC["producers"][0], "alpha": 0.45}],
}


@pytest.fixture(scope="session")
def s1_scenario():
    return parse_scenario(S1_DOC)


@pytest.fixture(scope="session")
def s1p_scenario():
    return parse_scenario(S1P_DOC)


@pytest.fixture(scope="session")
def s1_market():
    return derive_market(MarketParams(beta=1.0, delta=1.0, mu_tilde=0.0,
                                      sigma_tilde=1.0, D0=1.0))


@pytest.fixture(scope="session")
def s1_producer():
    return ProducerType(c=1.0, alpha=0.5, lam=0.5, k=1.0 / 6.0, r=2.0,
                        weight=1.0, name="t1")


@pytest.fixture(scope="session")
def s1p_producer():
    return ProducerType(c=1.0, alpha=0.45, lam=0.5, k=1.0 / 6.0, r=2.0,
                        weight=1.0, name="t1")


@pytest.fixture(scope="session")
def s1_profile(s1_producer, s1_market):
    return EquilibriumProfile([s1_producer], s1_market)


@pytest.fixture(scope="session")
def s1p_profile(s1p_producer, s1_market):
    return EquilibriumProfile([s1p_producer], s1_market)


def random_population(seed: int, n: int = 5):
    rng = np.random.default_rng(seed)
    return [
        ProducerType(
            c=float(rng.uniform(0.3, 3.0)),
            alpha=float(rng.uniform(0.2, 0.6)),
            lam=float(rng.uniform(0.2, 1.5)),
            k=float(rng.uniform(0.05, 0.5)),
            r=float(rng.uniform(0.8, 2.0)),
            weight=float(rng.uniform(0.5, 2.0)),
            name=f"p{i}",
        )
        for i in range(n)
    ]


@pytest.fixture(scope="session")
def fivetype_market():
    return derive_market(MarketParams(beta=0.8, delta=1.5, mu_tilde=0.02,
                                      sigma_tilde=0.35, D0=1.2))
