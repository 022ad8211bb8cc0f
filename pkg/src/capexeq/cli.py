"""Command-line interface: scenario ingestion and artifact emission.

Subcommands: validate, equilibrium, boundaries, simulate, verify,
asymptotics.  All outputs are byte-stable for a fixed (config, seed):
CSV files use comma separators, '.' decimals, a header row, and
17-significant-digit floats so doubles round-trip losslessly; JSON
reports carry the effective flags in a metadata block.

Exit codes: 0 success, 1 numeric/check failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .clearing import EquilibriumProfile, NumericalError, asymptotic_slope
from .config import (
    DEFAULT_TOLERANCES,
    ConfigError,
    Scenario,
    load_scenario,
    resolve_output_dir,
)
from .control import ControlSolution
from .paths import (
    PayoffEstimator,
    SimConfig,
    clearing_residual,
    price_paths,
    simulate_batch,
    threshold_strategy,
)
from .population import ParameterError, alpha_bar, validate_assumptions
from . import verify as verify_mod


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]):
    rows = zip(*columns)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _metadata(scenario: Scenario, args) -> dict:
    # deliberately excludes --threads and --out-dir so output bytes are
    # identical for a fixed (config, seed) regardless of worker count
    meta = {
        "scenario": scenario.name,
        "config": str(args.config),
        "seed": scenario.simulation.seed,
        "tolerance_overrides": args.tolerances or "",
    }
    if getattr(args, "producer", None):
        meta["producer"] = args.producer
    if getattr(args, "suite", None):
        meta["suites"] = list(args.suite)
    return meta


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _profile(scenario: Scenario) -> EquilibriumProfile:
    return EquilibriumProfile(
        scenario.producers,
        scenario.market,
        pbar_min=scenario.grids.pbar_min,
        pbar_max=scenario.grids.pbar_max,
        n_nodes=scenario.grids.n_nodes,
        fixed_point_tol=scenario.tolerances["fixed_point"],
    )


def _producer_index(scenario: Scenario, name: str | None) -> int:
    if name is None:
        return 0
    for i, p in enumerate(scenario.producers):
        if p.name == name:
            return i
    raise ConfigError(f"unknown producer id {name!r}; have "
                      f"{[p.name for p in scenario.producers]}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(scenario: Scenario, args, out: Path) -> int:
    report = validate_assumptions(scenario.producers, scenario.market)
    payload = report.to_dict()
    payload["metadata"] = _metadata(scenario, args)
    _write_json(out / "validation.json", payload)
    for chk in report.producer_checks:
        status = "ok" if chk.passed else "FAIL"
        print(f"{chk.name or '(unnamed)'}: {status}"
              + ("" if chk.passed else f" - {'; '.join(chk.reasons)}"))
        for warning in chk.warnings:
            print(f"  warning: {warning}")
    print(f"kappa0 = {report.kappa0:.12g}, alpha_bar = {report.alpha_bar:.12g}")
    return 0 if report.passed else 1


def cmd_equilibrium(scenario: Scenario, args, out: Path) -> int:
    profile = _profile(scenario)
    _write_csv(out / "equilibrium_pbar.csv",
               ["pbar", "psi", "h"],
               [profile.pbar_grid, profile.psi_grid, profile.h_grid])
    names = [p.name or f"producer{i}" for i, p in enumerate(scenario.producers)]
    cols = [profile.xbar_grid, profile.phi_grid, profile.u_grid]
    cols += [profile.Phi(profile.xbar_grid, i) for i in range(len(names))]
    _write_csv(out / "equilibrium_xbar.csv",
               ["xbar", "phi", "u"] + [f"Phi_{n}" for n in names], cols)
    meta = _metadata(scenario, args)
    meta["fixed_point_residual"] = profile.fixed_point_residual
    _write_json(out / "equilibrium_meta.json", meta)
    print(f"wrote equilibrium profiles ({len(profile.pbar_grid)} nodes) to {out}")
    return 0


def cmd_boundaries(scenario: Scenario, args, out: Path) -> int:
    idx = _producer_index(scenario, args.producer)
    profile = _profile(scenario)
    sol = ControlSolution(scenario.producers[idx], scenario.market, profile)
    x0 = scenario.market.X0
    xb = np.geomspace(0.25 * x0, 8.0 * x0, 81)
    _write_csv(out / "surface_S2.csv", ["xbar", "Phi"],
               [xb, np.array([float(sol.Phi(v)) for v in xb])])
    rows_c, rows_xb, rows_g = [], [], []
    for xbv in xb[::4]:
        cs = np.geomspace(0.1, 1.0, 21) * float(sol.Phi(xbv))
        g = np.asarray(sol.G(cs, xbv), dtype=float)
        rows_c.append(cs)
        rows_xb.append(np.full_like(cs, xbv))
        rows_g.append(g)
    _write_csv(out / "surface_S1.csv", ["c", "xbar", "G"],
               [np.concatenate(rows_c), np.concatenate(rows_xb),
                np.concatenate(rows_g)])
    _write_json(out / "boundaries_meta.json", _metadata(scenario, args))
    print(f"wrote free-boundary surfaces for producer "
          f"{scenario.producers[idx].name!r} to {out}")
    return 0


def cmd_simulate(scenario: Scenario, args, out: Path) -> int:
    profile = _profile(scenario)
    idx = _producer_index(scenario, args.producer)
    p = scenario.producers[idx]
    sol = ControlSolution(p, scenario.market, profile)
    sim = scenario.simulation
    mkt = scenario.market
    x0, xb0, c0 = mkt.X0, scenario.xbar0, p.c
    cfg = SimConfig(T=sim.T, n_steps=sim.n_steps, n_paths=sim.n_paths,
                    seed=sim.seed, scheme=sim.scheme, threads=sim.threads)

    batch = simulate_batch(mkt, x0, cfg, 0)
    n_emit = min(args.paths_out, batch.X.shape[0])
    strat = threshold_strategy(sol, c0, xb0, 1.0)
    C = strat(batch)
    P, Pbar = price_paths(profile, batch.X, batch.M, xb0)
    cres = clearing_residual(profile, batch.X, batch.M, xb0)
    xt = np.maximum(batch.M, xb0)
    cols = {"path": [], "t": [], "X": [], "Xtilde": [], "C": [],
            "P": [], "Pbar": [], "clearing_residual": []}
    for i in range(n_emit):
        cols["path"].append(np.full_like(batch.t, i))
        cols["t"].append(batch.t)
        cols["X"].append(batch.X[i])
        cols["Xtilde"].append(xt[i])
        cols["C"].append(C[i])
        cols["P"].append(P[i])
        cols["Pbar"].append(Pbar[i])
        cols["clearing_residual"].append(cres[i])
    _write_csv(out / "paths.csv", list(cols),
               [np.concatenate(v) for v in cols.values()])

    est = PayoffEstimator(market=mkt, phi_fn=profile, cfg=cfg, x0=x0, xbar=xb0,
                          alpha=p.alpha, k=p.k, r=p.r, c0=c0)
    res = est.estimate({
        "optimal": threshold_strategy(sol, c0, xb0, 1.0),
        "scaled-0.8": threshold_strategy(sol, c0, xb0, 0.8),
        "scaled-1.25": threshold_strategy(sol, c0, xb0, 1.25),
    })
    payload = {
        "metadata": _metadata(scenario, args),
        "closed_form_value": sol.value(c0, x0, xb0),
        "payoffs": {
            name: {"mean": e.mean, "se": e.se, "n_paths": e.n_paths,
                   "tail": e.tail}
            for name, e in res.items()
        },
    }
    _write_json(out / "payoffs.json", payload)
    opt = res["optimal"]
    print(f"J(optimal) = {opt.mean:.6g} +/- {opt.se:.2g} "
          f"(closed form {payload['closed_form_value']:.6g})")
    return 0


def cmd_verify(scenario: Scenario, args, out: Path) -> int:
    selectors = args.suite or None
    results = verify_mod.run_suites(scenario, selectors)
    report = json.loads(verify_mod.report_json(results))
    _write_json(out / "verify_report.json",
                {"metadata": _metadata(scenario, args), "checks": report})
    print(verify_mod.summary_table(results))
    return 0 if verify_mod.all_passed(results) else 1


def cmd_asymptotics(scenario: Scenario, args, out: Path) -> int:
    profile = _profile(scenario)
    ab = alpha_bar(scenario.producers)
    g, b = profile.gamma, profile.beta
    deep = max(float(profile.activation_pbar.max()) * 1e2, 1.0)
    zz = np.geomspace(deep, deep * 1e3, 40)
    xx = profile.h(zz)
    fits = {
        "psi": (asymptotic_slope(zz, profile.psi(zz)),
                -ab * (1.0 + b) * g / (1.0 - ab)),
        "phi": (asymptotic_slope(xx, profile.phi(xx)),
                -ab * g / (1.0 - ab + ab * g)),
        "u": (asymptotic_slope(xx, profile.u(xx)),
              (1.0 - ab) / (1.0 - ab + ab * g)),
    }
    payload = {"metadata": _metadata(scenario, args), "fits": {}}
    for name, (fit, predicted) in fits.items():
        payload["fits"][name] = {
            "fitted_slope": fit.slope,
            "halfwidth": fit.halfwidth,
            "predicted_slope": predicted,
            "rel_error": abs(fit.slope - predicted) / abs(predicted),
        }
        print(f"{name}: fitted {fit.slope:+.6f}  predicted {predicted:+.6f}")
    _write_json(out / "asymptotics.json", payload)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


_COMMANDS = {
    "validate": cmd_validate,
    "equilibrium": cmd_equilibrium,
    "boundaries": cmd_boundaries,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "asymptotics": cmd_asymptotics,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capexeq",
        description="Competitive capacity-expansion equilibrium toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__)
        sp.add_argument("config", help="scenario JSON file")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the simulation seed")
        sp.add_argument("--out-dir", default=None,
                        help="output directory (overrides config and "
                             "CAPEXEQ_OUT_DIR)")
        sp.add_argument("--tolerances", default=None,
                        help="JSON object (inline or @file) of tolerance "
                             "overrides")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads for simulation batches")
        if name in ("boundaries", "simulate"):
            sp.add_argument("--producer", default=None,
                            help="producer id (default: first in config)")
        if name == "simulate":
            sp.add_argument("--paths-out", type=int, default=8,
                            help="number of sample paths to write to CSV")
        if name == "verify":
            sp.add_argument("--suite", action="append",
                            choices=sorted(verify_mod.SUITES),
                            help="run only the named suite (repeatable)")
    return parser


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    sim = scenario.simulation
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        sim = replace(sim, threads=args.threads)
    scenario.simulation = sim
    if args.tolerances:
        raw = args.tolerances
        if raw.startswith("@"):
            raw = Path(raw[1:]).read_text()
        try:
            tols = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--tolerances: invalid JSON: {exc.msg}") from exc
        unknown = set(tols) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"--tolerances: unknown keys {sorted(unknown)}")
        scenario.tolerances.update({k: float(v) for k, v in tols.items()})
    return scenario


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        scenario = load_scenario(args.config)
        scenario = _apply_overrides(scenario, args)
        out = resolve_output_dir(scenario, args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](scenario, args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ParameterError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
