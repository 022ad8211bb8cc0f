"""Scenario configuration: a single JSON document describing a market,
its producer population, and the numerical settings for a run.

The market block accepts either primitive parameters
(beta, delta, mu_tilde, sigma_tilde, D0) or the reduced demand-factor
parameters (beta, gamma, mu, sigma, X0) directly.  Parse failures raise
ConfigError with the offending field path so command-line users get a
pinpointed message.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .population import (
    DerivedMarket,
    MarketParams,
    ParameterError,
    ProducerType,
    derive_market,
)


class ConfigError(ValueError):
    """A scenario file that cannot be parsed into valid model inputs."""


#: default tolerances for every numerical check, overridable per scenario
DEFAULT_TOLERANCES = {
    "root_identity": 1e-10,
    "psi_limit": 1e-12,
    "fixed_point": 1e-8,
    "closed_form": 1e-8,
    "slope_rel": 0.02,
    "hjb_pde_rel": 1e-4,
    "gradient": 1e-6,
    "pasting": 1e-5,
    "continuity": 1e-8,
    "a_cross": 1e-7,
    "clearing": 1e-6,
    "price_eqn": 1e-6,
    "mc_sigma": 3.0,
    "subopt_sigma": 2.0,
    "halving_band": 0.2,
}


@dataclass(frozen=True)
class GridConfig:
    pbar_min: float = 1e-3
    pbar_max: float = 1e7
    n_nodes: int = 201

    def __post_init__(self):
        if not (0 < self.pbar_min < self.pbar_max) or self.n_nodes < 2:
            raise ConfigError("grids: need 0 < pbar_min < pbar_max, n_nodes >= 2")


@dataclass(frozen=True)
class SimulationConfig:
    T: float = 1.0
    n_steps: int = 500
    n_paths: int = 10000
    seed: int = 0
    scheme: str = "bridge"
    threads: int = 1
    xbar0: float | None = None  # initial price-max state; defaults to X0


@dataclass
class Scenario:
    name: str
    producers: list[ProducerType]
    market: DerivedMarket
    grids: GridConfig = field(default_factory=GridConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_dir: str = "out"

    @property
    def xbar0(self) -> float:
        xb = self.simulation.xbar0
        return self.market.X0 if xb is None else xb


_PRIMITIVE_KEYS = {"beta", "delta", "mu_tilde", "sigma_tilde", "D0"}
_REDUCED_KEYS = {"beta", "gamma", "mu", "sigma", "X0"}


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: missing required field")
    return d[key]


def _parse_market(block, path="market") -> DerivedMarket:
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    keys = set(block)
    try:
        if keys == _PRIMITIVE_KEYS:
            return derive_market(MarketParams(**block))
        if keys == _REDUCED_KEYS:
            return DerivedMarket(**block)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(
        f"{path}: keys must be exactly {sorted(_PRIMITIVE_KEYS)} "
        f"or {sorted(_REDUCED_KEYS)}, got {sorted(keys)}"
    )


def _parse_producer(block, idx: int) -> ProducerType:
    path = f"producers[{idx}]"
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    allowed = {"c", "alpha", "lam", "k", "r", "weight", "name"}
    extra = set(block) - allowed
    if extra:
        raise ConfigError(f"{path}: unknown fields {sorted(extra)}")
    for key in ("c", "alpha", "lam", "k", "r"):
        _require(block, key, path)
    try:
        return ProducerType(**block)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_scenario(doc: dict, name_hint: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    market = _parse_market(_require(doc, "market", "top level").copy())
    producers_raw = _require(doc, "producers", "top level")
    if not isinstance(producers_raw, list) or not producers_raw:
        raise ConfigError("producers: expected a non-empty array")
    producers = [_parse_producer(p, i) for i, p in enumerate(producers_raw)]

    try:
        grids = GridConfig(**doc.get("grids", {}))
    except TypeError as exc:
        raise ConfigError(f"grids: {exc}") from exc
    try:
        sim = SimulationConfig(**doc.get("simulation", {}))
    except TypeError as exc:
        raise ConfigError(f"simulation: {exc}") from exc

    tolerances = dict(DEFAULT_TOLERANCES)
    tol_block = doc.get("tolerances", {})
    if not isinstance(tol_block, dict):
        raise ConfigError("tolerances: expected an object")
    unknown = set(tol_block) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ConfigError(f"tolerances: unknown keys {sorted(unknown)}")
    tolerances.update({k: float(v) for k, v in tol_block.items()})

    return Scenario(
        name=doc.get("name", name_hint),
        producers=producers,
        market=market,
        grids=grids,
        simulation=sim,
        tolerances=tolerances,
        output_dir=doc.get("output_dir", "out"),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_scenario(doc, name_hint=path.stem)


def resolve_output_dir(scenario: Scenario, override: str | None = None) -> Path:
    """Output directory priority: CLI flag, CAPEXEQ_OUT_DIR env, scenario."""
    if override:
        return Path(override)
    env = os.environ.get("CAPEXEQ_OUT_DIR")
    if env:
        return Path(env)
    return Path(scenario.output_dir)
