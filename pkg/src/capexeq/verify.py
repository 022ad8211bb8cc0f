"""Named, machine-readable verification suites.

Each suite runs a family of numerical checks against a scenario and
returns CheckResult records suitable for JSON reports and CI logs.  The
suites deliberately include negative controls (corrupted inputs that
must fail) so the harness tests its own sensitivity.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .clearing import EquilibriumProfile, asymptotic_slope
from .config import Scenario
from .control import ConstantPhi, ControlSolution
from .paths import (
    PayoffEstimator,
    SimConfig,
    coarsen,
    constant_strategy,
    clearing_residual,
    price_dynamics_residual,
    price_paths,
    simulate_batch,
    threshold_strategy,
)
from .population import (
    alpha_bar,
    characteristic_roots,
    validate_assumptions,
)


@dataclass
class CheckResult:
    check_id: str
    scenario_id: str
    status: str  # "pass" | "fail" | "skip"
    measured: dict = field(default_factory=dict)
    tolerance: float | None = None
    notes: str = ""


def _check(check_id, scenario_id, ok, measured, tol, notes=""):
    return CheckResult(
        check_id=check_id,
        scenario_id=scenario_id,
        status="pass" if ok else "fail",
        measured=measured,
        tolerance=tol,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Identity suite: characteristic roots and their algebraic relations
# ---------------------------------------------------------------------------


def _root_identity_errors(mu, sigma, r, n, m):
    e1 = abs((n + m - 1.0) + 2.0 * mu / sigma**2)
    e2 = abs(n * m + 2.0 * r / sigma**2)
    e3 = abs((r - mu) - 0.5 * sigma**2 * (n - 1.0) * (1.0 - m))
    return max(e1, e2, e3)


def run_identity_suite(scenario: Scenario, n_draws: int = 1000, seed: int = 0):
    tol = scenario.tolerances["root_identity"]
    sid = scenario.name
    results = []

    worst = 0.0
    for p in scenario.producers:
        m, n = characteristic_roots(scenario.market.mu, scenario.market.sigma, p.r)
        worst = max(worst, _root_identity_errors(
            scenario.market.mu, scenario.market.sigma, p.r, n, m))
        if (p.r > scenario.market.mu) != (n > 1.0):
            worst = math.inf
    results.append(_check("roots.scenario-identities", sid, worst < tol,
                          {"max_error": worst}, tol))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_draws):
        mu = rng.uniform(-1.0, 1.0)
        sigma = rng.uniform(0.05, 2.0)
        r = rng.uniform(0.01, 3.0)
        m, n = characteristic_roots(mu, sigma, r)
        worst = max(worst, _root_identity_errors(mu, sigma, r, n, m))
        if not (m < 0.0 < n) or (r > mu) != (n > 1.0):
            worst = math.inf
    results.append(_check("roots.random-draws", sid, worst < tol,
                          {"draws": n_draws, "max_error": worst}, tol))

    # negative control: a deliberately corrupted root must break the identities
    p = scenario.producers[0]
    m, n = characteristic_roots(scenario.market.mu, scenario.market.sigma, p.r)
    corrupted = _root_identity_errors(
        scenario.market.mu, scenario.market.sigma, p.r, n + 1e-6, m)
    results.append(_check("roots.negative-control", sid, corrupted > tol,
                          {"corrupted_error": corrupted}, tol,
                          notes="corrupted n must violate the identities"))
    return results


# ---------------------------------------------------------------------------
# Equilibrium suite: clearing profile shape, round trips, tail slopes
# ---------------------------------------------------------------------------


def run_equilibrium_suite(scenario: Scenario):
    sid = scenario.name
    tols = scenario.tolerances
    results = []
    profile = EquilibriumProfile(
        scenario.producers,
        scenario.market,
        pbar_min=scenario.grids.pbar_min,
        pbar_max=scenario.grids.pbar_max,
        n_nodes=scenario.grids.n_nodes,
        fixed_point_tol=tols["fixed_point"],
    )

    # small-price limit of aggregate supply
    lim = profile.psi(scenario.grids.pbar_min * 1e-6)
    target = profile.kappa0 ** (-profile.gamma)
    err = abs(lim - target) / target
    results.append(_check("equilibrium.psi-limit", sid, err < tols["psi_limit"],
                          {"rel_error": err}, tols["psi_limit"]))

    pb = profile.pbar_grid
    results.append(_check(
        "equilibrium.monotonicity", sid,
        bool(np.all(np.diff(profile.psi_grid) <= 0)
             and np.all(np.diff(profile.h_grid) > 0)
             and np.all(np.diff(profile.phi_grid) <= 0)
             and np.all(np.diff(profile.u_grid) > 0)),
        {}, None, notes="psi down, h up, phi down, u up on the grid"))

    rt = np.abs(profile.h_inv(profile.h(pb)) / pb - 1.0)
    results.append(_check("equilibrium.h-roundtrip", sid,
                          float(rt.max()) < 1e-9,
                          {"max_rel_error": float(rt.max())}, 1e-9))

    results.append(_check("equilibrium.fixed-point", sid,
                          profile.fixed_point_residual < tols["fixed_point"],
                          {"residual": profile.fixed_point_residual},
                          tols["fixed_point"]))

    # tail slopes against the predicted asymptotic exponents
    ab = alpha_bar(scenario.producers)
    g, b = profile.gamma, profile.beta
    deep = max(profile.activation_pbar.max() * 1e2, 1.0)
    fit_p = (deep, deep * 1e3)
    # fit on freshly evaluated deep-tail points (grid may not extend far enough)
    zz = np.geomspace(fit_p[0], fit_p[1], 40)
    slope_psi = asymptotic_slope(zz, profile.psi(zz)).slope
    xx = profile.h(zz)
    slope_phi = asymptotic_slope(xx, profile.phi(xx)).slope
    slope_u = asymptotic_slope(xx, profile.u(xx)).slope
    want = {
        "psi": -ab * (1.0 + b) * g / (1.0 - ab),
        "phi": -ab * g / (1.0 - ab + ab * g),
        "u": (1.0 - ab) / (1.0 - ab + ab * g),
    }
    got = {"psi": slope_psi, "phi": slope_phi, "u": slope_u}
    err = max(abs(got[k] - want[k]) / abs(want[k]) for k in want)
    results.append(_check("equilibrium.tail-slopes", sid, err < tols["slope_rel"],
                          {"fitted": got, "predicted": want, "worst_rel": err},
                          tols["slope_rel"]))

    # underlying assumption validation must agree with profile construction
    rep = validate_assumptions(scenario.producers, scenario.market)
    results.append(_check("equilibrium.assumptions", sid, rep.passed,
                          {"kappa0": rep.kappa0, "alpha_bar": rep.alpha_bar},
                          None))
    return results, profile


# ---------------------------------------------------------------------------
# HJB suite: region residuals, pasting, continuity, positivity, growth
# ---------------------------------------------------------------------------


def run_hjb_suite(scenario: Scenario, grid_shape=(20, 20, 20),
                  producer_index: int = 0, profile: EquilibriumProfile | None = None):
    sid = scenario.name
    tols = scenario.tolerances
    results = []
    p = scenario.producers[producer_index]
    if profile is None:
        profile = EquilibriumProfile(scenario.producers, scenario.market,
                                     fixed_point_tol=tols["fixed_point"])
    sol = ControlSolution(p, scenario.market, profile)

    x0 = scenario.market.X0
    nc, nx, nxb = grid_shape
    xb_grid = np.geomspace(0.5 * x0, 4.0 * x0, nxb)
    worst_pde = worst_grad = worst_c1 = 0.0
    w_min = math.inf
    for xb in xb_grid:
        phi_xb = float(sol.Phi(xb))
        c_grid = np.geomspace(0.25 * phi_xb, 4.0 * phi_xb, nc)
        x_grid = np.linspace(0.2, 1.0, nx) * xb
        for c in c_grid:
            for x in x_grid:
                res = sol.hjb_residual(c, x, xb)
                w_min = min(w_min, sol.value(c, x, xb))
                if res.region in ("C2", "C3", "S1", "S2"):
                    worst_pde = max(worst_pde, abs(res.pde_residual) / res.pde_scale)
                    worst_grad = max(worst_grad, res.gradient_slack)
                else:
                    # investing region: marginal value equals unit cost
                    worst_c1 = max(worst_c1, abs(res.gradient_slack))
                    worst_pde = max(worst_pde, res.pde_residual / res.pde_scale)
    results.append(_check("hjb.pde-residual", sid, worst_pde < tols["hjb_pde_rel"],
                          {"worst_rel": worst_pde, "grid": list(grid_shape)},
                          tols["hjb_pde_rel"]))
    results.append(_check("hjb.gradient-bound", sid,
                          worst_grad < tols["gradient"] and worst_c1 < tols["gradient"],
                          {"worst_slack": worst_grad, "worst_c1_gap": worst_c1},
                          tols["gradient"]))
    results.append(_check("hjb.positivity", sid, w_min > 0.0,
                          {"min_value": w_min}, None))

    # smooth pasting at sampled boundary points
    worst_wc = worst_fb = 0.0
    for xb in np.geomspace(0.7 * x0, 3.0 * x0, 5):
        c = 0.6 * float(sol.Phi(xb))
        rep = sol.smooth_pasting_check(c, xb)
        worst_wc = max(worst_wc, rep["w_c_rel_err"])
        worst_fb = max(worst_fb, abs(rep["fb1_residual"]) / p.k,
                       rep["fb2_rel"], rep["fb3_rel"])
    results.append(_check("hjb.smooth-pasting", sid, worst_wc < tols["pasting"],
                          {"worst_w_c_rel": worst_wc}, tols["pasting"]))
    results.append(_check("hjb.boundary-equations", sid, worst_fb < tols["gradient"],
                          {"worst_rel": worst_fb}, tols["gradient"]))

    # continuity across the investment and waiting surfaces
    worst_jump = 0.0
    for xb in (0.8 * x0, 1.7 * x0):
        phi_xb = float(sol.Phi(xb))
        for cc, xx in ((float(sol.Gamma(0.5 * xb, xb)), 0.5 * xb),
                       (phi_xb, 0.9 * xb)):
            lo = sol.value(cc * (1 - 1e-9), xx, xb)
            hi = sol.value(cc * (1 + 1e-9), xx, xb)
            worst_jump = max(worst_jump, abs(hi - lo) / abs(lo))
    results.append(_check("hjb.surface-continuity", sid,
                          worst_jump < tols["continuity"],
                          {"worst_rel_jump": worst_jump}, tols["continuity"]))

    # coefficient cross-check on random states
    rng = np.random.default_rng(1)
    worst_a = 0.0
    for xb in x0 * np.exp(rng.uniform(-1.0, 2.0, size=20)):
        a1, a2 = sol._A_pair(float(xb))
        worst_a = max(worst_a, abs(a1 - a2) / max(abs(a1), abs(a2)))
    results.append(_check("hjb.coefficient-crosscheck", sid,
                          worst_a < tols["a_cross"],
                          {"worst_rel": worst_a}, tols["a_cross"]))

    # growth spot checks: increasing in x, sublinear (power alpha) in c
    ok_growth = True
    for xb in (x0, 2.0 * x0):
        xs = np.linspace(0.2, 1.0, 6) * xb
        ws = [sol.value(0.5 * float(sol.Phi(xb)), x, xb) for x in xs]
        ok_growth &= bool(np.all(np.diff(ws) > 0))
        c_hi = 4.0 * float(sol.Phi(xb))
        ratio = sol.value(2 * c_hi, 0.7 * xb, xb) / sol.value(c_hi, 0.7 * xb, xb)
        ok_growth &= ratio < 2.0**p.alpha * 1.05
    results.append(_check("hjb.growth", sid, ok_growth, {}, None,
                          notes="w increasing in x; ~c^alpha growth in c"))
    return results, sol


# ---------------------------------------------------------------------------
# Monte Carlo suite: payoff optimality, market clearing, price dynamics
# ---------------------------------------------------------------------------


def run_mc_suite(scenario: Scenario, profile=None, sol=None):
    sid = scenario.name
    tols = scenario.tolerances
    sim = scenario.simulation
    results = []
    if profile is None:
        profile = EquilibriumProfile(scenario.producers, scenario.market,
                                     fixed_point_tol=tols["fixed_point"])
    p = scenario.producers[0]
    if sol is None:
        sol = ControlSolution(p, scenario.market, profile)
    mkt = scenario.market
    x0, xb0, c0 = mkt.X0, scenario.xbar0, p.c
    cfg = SimConfig(T=sim.T, n_steps=sim.n_steps, n_paths=sim.n_paths,
                    seed=sim.seed, scheme=sim.scheme, threads=sim.threads)

    # closed-form sanity: constant price functional, never invest
    phi0 = ConstantPhi(float(profile.phi(xb0)))
    est0 = PayoffEstimator(market=mkt, phi_fn=phi0, cfg=cfg, x0=x0, xbar=xb0,
                           alpha=p.alpha, k=p.k, r=p.r, c0=c0)
    res0 = est0.estimate({"never": constant_strategy(c0)})["never"]
    target = c0**p.alpha * x0 * phi0.value / (p.r - mkt.mu)
    gap = abs(res0.mean + res0.tail - target)
    results.append(_check("mc.constant-phi-value", sid,
                          gap < tols["mc_sigma"] * res0.se,
                          {"estimate": res0.mean, "tail": res0.tail,
                           "target": target, "se": res0.se,
                           "sigmas": gap / res0.se}, tols["mc_sigma"]))

    # optimal strategy value vs the closed form, with suboptimal comparators
    est = PayoffEstimator(market=mkt, phi_fn=profile, cfg=cfg, x0=x0, xbar=xb0,
                          alpha=p.alpha, k=p.k, r=p.r, c0=c0)
    res = est.estimate({
        "optimal": threshold_strategy(sol, c0, xb0, 1.0),
        "scaled-0.8": threshold_strategy(sol, c0, xb0, 0.8),
        "scaled-1.25": threshold_strategy(sol, c0, xb0, 1.25),
    })
    w = sol.value(c0, x0, xb0)
    opt = res["optimal"]
    gap = abs(opt.mean + opt.tail - w)
    results.append(_check("mc.value-match", sid, gap < tols["mc_sigma"] * opt.se,
                          {"estimate": opt.mean, "tail": opt.tail,
                           "closed_form": w, "se": opt.se,
                           "sigmas": gap / opt.se}, tols["mc_sigma"]))
    for name in ("scaled-0.8", "scaled-1.25"):
        sub = res[name]
        ok = sub.mean <= opt.mean + tols["subopt_sigma"] * opt.se
        results.append(_check(f"mc.suboptimal.{name}", sid, ok,
                              {"suboptimal": sub.mean, "optimal": opt.mean,
                               "se": opt.se}, tols["subopt_sigma"],
                              notes="common random numbers"))

    # market clearing and the pathwise price fixed point
    cfg1 = SimConfig(T=min(sim.T, 1.0), n_steps=max(sim.n_steps, 400),
                     n_paths=min(sim.n_paths, 4096), seed=sim.seed,
                     scheme="discrete")
    b = simulate_batch(mkt, x0, cfg1, 0)
    cr = clearing_residual(profile, b.X, b.M, xb0)
    results.append(_check("mc.market-clearing", sid,
                          float(cr.max()) < tols["clearing"],
                          {"max_rel": float(cr.max())}, tols["clearing"]))
    P, Pbar = price_paths(profile, b.X, b.M, xb0)
    peqn = np.abs(P ** (1.0 + profile.beta) - b.X * profile.psi(Pbar))
    peqn /= P ** (1.0 + profile.beta)
    results.append(_check("mc.price-eqn", sid,
                          float(peqn.max()) < tols["price_eqn"],
                          {"max_rel": float(peqn.max())}, tols["price_eqn"]))

    # refinement: one-step price-SDE defect shrinks at first order.  Start on
    # the diagonal (x0 = xbar0) so the running maximum moves from t = 0, and
    # use a fine grid so the first-order rate is resolved.
    cfg2 = SimConfig(T=cfg1.T, n_steps=max(cfg1.n_steps, 1600),
                     n_paths=cfg1.n_paths, seed=cfg1.seed, scheme="discrete")
    b2 = simulate_batch(mkt, xb0, cfg2, 0)
    fine = price_dynamics_residual(profile, b2.t, b2.X, b2.M, b2.dW, xb0)
    tc, Xc, Mc, dWc = coarsen(b2.t, b2.X, b2.M, b2.dW, 2)
    coarse = price_dynamics_residual(profile, tc, Xc, Mc, dWc, xb0)
    ratio = fine.mean_path_max / coarse.mean_path_max
    band = tols["halving_band"]
    results.append(_check("mc.price-sde-refinement", sid,
                          0.5 * (1 - band) <= ratio <= 0.5 * (1 + band),
                          {"ratio": ratio, "coarse": coarse.mean_path_max,
                           "fine": fine.mean_path_max,
                           "max_defect_ratio": fine.max_defect / coarse.max_defect},
                          band, notes="per-path max defect, averaged over paths"))
    return results


# ---------------------------------------------------------------------------
# Aggregation and reporting
# ---------------------------------------------------------------------------


SUITES = {
    "identities": lambda sc: run_identity_suite(sc),
    "equilibrium": lambda sc: run_equilibrium_suite(sc)[0],
    "hjb": lambda sc: run_hjb_suite(sc)[0],
    "mc": lambda sc: run_mc_suite(sc),
}


def run_suites(scenario: Scenario, selectors=None) -> list[CheckResult]:
    selectors = list(SUITES) if not selectors else list(selectors)
    unknown = set(selectors) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites: {sorted(unknown)}")
    results = []
    for name in selectors:  # fixed order: deterministic aggregation
        results.extend(SUITES[name](scenario))
    return results


def all_passed(results) -> bool:
    return all(r.status != "fail" for r in results)


def report_json(results) -> str:
    return json.dumps([asdict(r) for r in results], indent=2, sort_keys=True)


def summary_table(results) -> str:
    width = max(len(r.check_id) for r in results)
    lines = [f"{'check':<{width}}  status  tolerance"]
    for r in results:
        tol = "-" if r.tolerance is None else f"{r.tolerance:g}"
        lines.append(f"{r.check_id:<{width}}  {r.status:<6}  {tol}")
    n_fail = sum(r.status == "fail" for r in results)
    lines.append(f"{len(results)} checks, {n_fail} failed")
    return "\n".join(lines)
