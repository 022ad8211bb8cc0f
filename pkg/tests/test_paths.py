import math

import numpy as np
import pytest

from capexeq.clearing import EquilibriumProfile
from capexeq.control import ConstantPhi, ControlSolution
from capexeq.paths import (
    BATCH_SIZE,
    PayoffEstimator,
    SimConfig,
    _batch_payoffs,
    clearing_residual,
    coarsen,
    constant_strategy,
    n_batches,
    price_dynamics_residual,
    price_paths,
    simulate_batch,
    threshold_strategy,
)
from capexeq.population import DerivedMarket, ParameterError


def test_sim_config_validation():
    with pytest.raises(ParameterError):
        SimConfig(T=0.0, n_steps=10, n_paths=10, seed=0)
    with pytest.raises(ParameterError):
        SimConfig(T=1.0, n_steps=10, n_paths=10, seed=0, scheme="euler")


def test_gbm_moment(s1_market):
    cfg = SimConfig(T=1.0, n_steps=50, n_paths=100000, seed=3)
    means = []
    for b in range(n_batches(cfg.n_paths)):
        means.append(simulate_batch(s1_market, 1.0, cfg, b).X[:, -1])
    xT = np.concatenate(means)
    est = xT.mean()
    se = xT.std(ddof=1) / math.sqrt(len(xT))
    assert abs(est - math.exp(s1_market.mu)) < 3 * se


def test_near_deterministic_limit():
    dm = DerivedMarket(beta=1.0, gamma=0.9, mu=0.3, sigma=1e-8, X0=1.0)
    cfg = SimConfig(T=2.0, n_steps=40, n_paths=8, seed=0)
    b = simulate_batch(dm, 1.0, cfg, 0)
    assert np.allclose(b.X, np.exp(dm.mu * b.t)[None, :], rtol=1e-5)
    assert np.allclose(b.M, np.maximum.accumulate(b.X, axis=1), rtol=1e-5)


def test_bridge_dominates_discrete(s1_market):
    kw = dict(T=1.0, n_steps=100, n_paths=4096, seed=11)
    bb = simulate_batch(s1_market, 1.0, SimConfig(scheme="bridge", **kw), 0)
    bd = simulate_batch(s1_market, 1.0, SimConfig(scheme="discrete", **kw), 0)
    # same Brownian increments drive both schemes
    assert np.array_equal(bb.X, bd.X)
    assert np.all(bb.M >= bd.M - 1e-15)
    gap_coarse = (bb.M[:, -1] - bd.M[:, -1]).mean()
    kw["n_steps"] = 400
    bb = simulate_batch(s1_market, 1.0, SimConfig(scheme="bridge", **kw), 0)
    bd = simulate_batch(s1_market, 1.0, SimConfig(scheme="discrete", **kw), 0)
    gap_fine = (bb.M[:, -1] - bd.M[:, -1]).mean()
    assert gap_fine < gap_coarse


def test_batch_content_independent_of_request_size(s1_market):
    cfg_small = SimConfig(T=1.0, n_steps=20, n_paths=100, seed=5)
    cfg_large = SimConfig(T=1.0, n_steps=20, n_paths=2 * BATCH_SIZE, seed=5)
    bs = simulate_batch(s1_market, 1.0, cfg_small, 0)
    bl = simulate_batch(s1_market, 1.0, cfg_large, 0)
    assert np.array_equal(bs.X, bl.X[:100])


def test_strategy_realization_s1(s1_producer, s1_market, s1_profile):
    sol = ControlSolution(s1_producer, s1_market, s1_profile)
    cfg = SimConfig(T=0.5, n_steps=50, n_paths=256, seed=1)
    b = simulate_batch(s1_market, 2.0, cfg, 0)
    # time-0 jump: with xbar=4, x=2, c=0.5 the initial target is Gamma(2,4)=1
    C = threshold_strategy(sol, 0.5, 4.0)(b)
    assert C[:, 0] == pytest.approx(1.0)
    assert np.all(np.diff(C, axis=1) >= 0)
    # no investment when c stays above the largest attainable threshold
    C_hi = threshold_strategy(sol, 100.0, 4.0)(b)
    assert np.all(C_hi == 100.0)


def test_raising_k_lowers_strategy(s1p_producer, s1_market, s1p_profile):
    import dataclasses
    sol_lo = ControlSolution(s1p_producer, s1_market, s1p_profile)
    dearer = dataclasses.replace(s1p_producer, k=2.0 * s1p_producer.k)
    sol_hi = ControlSolution(dearer, s1_market, s1p_profile)
    cfg = SimConfig(T=1.0, n_steps=50, n_paths=512, seed=9)
    b = simulate_batch(s1_market, 1.0, cfg, 0)
    c0 = 0.01  # small enough that both producers invest immediately
    C_lo = threshold_strategy(sol_lo, c0, 1.0)(b)
    C_hi = threshold_strategy(sol_hi, c0, 1.0)(b)
    assert np.all(C_hi <= C_lo + 1e-15)


def test_stieltjes_cost_time0_jump(s1_market):
    # a path with a single time-0 jump from c0 to C0 must cost exactly
    # k*(C0 - c0)
    cfg = SimConfig(T=1.0, n_steps=10, n_paths=8, seed=0)
    b = simulate_batch(s1_market, 1.0, cfg, 0)
    phi0 = ConstantPhi(1.0)
    C = np.full_like(b.X, 2.5)
    J, _ = _batch_payoffs(b, C, phi0, xbar=1.0, alpha=0.5, k=0.4, r=2.0,
                          rmu=1.5, c0=1.0)
    C_free = np.full_like(b.X, 2.5)
    J_free, _ = _batch_payoffs(b, C_free, phi0, xbar=1.0, alpha=0.5, k=0.0,
                               r=2.0, rmu=1.5, c0=1.0)
    assert np.allclose(J_free - J, 0.4 * 1.5)


def test_payoff_rejects_decreasing_paths(s1_market):
    cfg = SimConfig(T=1.0, n_steps=10, n_paths=8, seed=0)
    b = simulate_batch(s1_market, 1.0, cfg, 0)
    C = np.full_like(b.X, 2.0)
    C[:, 5] = 1.0
    with pytest.raises(ParameterError):
        _batch_payoffs(b, C, ConstantPhi(1.0), 1.0, 0.5, 0.4, 2.0, 1.5, 1.0)


def test_no_investment_value_constant_phi(s1p_producer, s1_market):
    # closed form: E int e^{-rt} c^a X_t phi0 dt = c^a x phi0 / (r - mu)
    phi0 = ConstantPhi(0.6)
    p = s1p_producer
    cfg = SimConfig(T=4.5, n_steps=300, n_paths=40000, seed=21, threads=2)
    est = PayoffEstimator(market=s1_market, phi_fn=phi0, cfg=cfg, x0=1.5,
                          xbar=2.0, alpha=p.alpha, k=p.k, r=p.r, c0=p.c)
    res = est.estimate({"never": constant_strategy(p.c)})["never"]
    target = p.c**p.alpha * 1.5 * 0.6 / (p.r - s1_market.mu)
    assert abs(res.mean + res.tail - target) < 3 * res.se


def test_estimator_thread_determinism(s1p_producer, s1_market, s1p_profile):
    sol = ControlSolution(s1p_producer, s1_market, s1p_profile)
    p = s1p_producer
    results = []
    for threads in (1, 3):
        cfg = SimConfig(T=2.0, n_steps=100, n_paths=3 * BATCH_SIZE + 17,
                        seed=13, threads=threads)
        est = PayoffEstimator(market=s1_market, phi_fn=s1p_profile, cfg=cfg,
                              x0=1.0, xbar=4.0, alpha=p.alpha, k=p.k, r=p.r,
                              c0=p.c)
        results.append(est.estimate({"opt": threshold_strategy(sol, p.c, 4.0)}))
    a, b = results
    assert a["opt"].mean == b["opt"].mean
    assert a["opt"].se == b["opt"].se


def test_price_paths_and_clearing(s1_profile, s1_market):
    cfg = SimConfig(T=1.0, n_steps=200, n_paths=1024, seed=2, scheme="discrete")
    b = simulate_batch(s1_market, 4.0, cfg, 0)
    P, Pbar = price_paths(s1_profile, b.X, b.M, 4.0)
    # P^{1+beta} = X phi(Xtilde) by construction; Pbar inverts h
    xt = np.maximum(b.M, 4.0)
    assert np.allclose(P**2, b.X * s1_profile.phi(xt), rtol=1e-12)
    assert np.allclose(s1_profile.h(Pbar), xt, rtol=1e-9)
    assert clearing_residual(s1_profile, b.X, b.M, 4.0).max() < 1e-9


def test_price_dynamics_refinement(s1_profile, s1_market):
    cfg = SimConfig(T=1.0, n_steps=800, n_paths=4096, seed=3, scheme="discrete")
    b = simulate_batch(s1_market, 4.0, cfg, 0)
    fine = price_dynamics_residual(s1_profile, b.t, b.X, b.M, b.dW, 4.0)
    tc, Xc, Mc, dWc = coarsen(b.t, b.X, b.M, b.dW, 2)
    coarse = price_dynamics_residual(s1_profile, tc, Xc, Mc, dWc, 4.0)
    ratio = fine.mean_path_max / coarse.mean_path_max
    assert 0.4 < ratio < 0.6


def test_coarsen_consistency(s1_market):
    cfg = SimConfig(T=1.0, n_steps=8, n_paths=4, seed=0)
    b = simulate_batch(s1_market, 1.0, cfg, 0)
    tc, Xc, Mc, dWc = coarsen(b.t, b.X, b.M, b.dW, 2)
    assert np.array_equal(tc, b.t[::2])
    assert np.array_equal(Xc, b.X[:, ::2])
    assert np.allclose(dWc.sum(axis=1), b.dW.sum(axis=1))
