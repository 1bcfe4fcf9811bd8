"""Scenario files: one YAML document describes environment, traffic, solar
supply, policies and run bookkeeping.

Defaults reproduce the reference setup (20 DUs, 4-function chain, the
standard energy table and RL parameters), so an empty file is a valid
scenario.  Validation collects every problem with its field path instead of
stopping at the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import yaml

from .agents import DiscretizationSpec, LearningParams
from .baselines import PolicyKind
from .env import EnvConfig, SimEnv
from .model import (
    FunctionChain,
    NodeEnergyConfig,
    TariffSchedule,
    TrafficKind,
    TrafficType,
)
from .oracle import OracleInstance
from .solar import SolarTrace, load_trace, synthetic_trace
from .traffic import TrafficProfileConfig, generate_load_matrix

__all__ = [
    "ConfigError",
    "SolarConfig",
    "PolicyConfig",
    "RunConfig",
    "OracleConfig",
    "ScenarioConfig",
    "load_scenario",
    "scenario_from_dict",
    "build_env",
    "build_oracle_instance",
]


class ConfigError(Exception):
    """Validation failure(s) with field-level messages."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


@dataclass(frozen=True)
class SolarConfig:
    site: str = "synthetic"
    trace: str | None = None          # CSV shared by every node
    cu_trace: str | None = None       # optional per-node overrides
    du_traces: tuple[str, ...] | None = None
    peak_kwh_per_unit: float = 0.2
    sunrise: int = 6
    sunset: int = 18
    cloud_sigma: float = 0.15


@dataclass(frozen=True)
class PolicyConfig:
    kinds: tuple[PolicyKind, ...] = (PolicyKind.RLDFS_QL,)
    learning: LearningParams = field(default_factory=LearningParams)
    discretization: DiscretizationSpec = field(default_factory=DiscretizationSpec)


@dataclass(frozen=True)
class RunConfig:
    seeds: tuple[int, ...] = (1,)
    out_dir: str = "results"


@dataclass(frozen=True)
class OracleConfig:
    horizon: int = 4
    horizon_cap: int = 8
    du_cap: int = 2
    chain_cap: int = 3
    battery_grid_step: float = 0.5
    dispatch_mode: str = "levels"
    method: str = "auto"


@dataclass(frozen=True)
class ScenarioConfig:
    env: EnvConfig
    traffic: TrafficProfileConfig
    solar: SolarConfig
    policy: PolicyConfig
    run: RunConfig
    oracle: OracleConfig
    reset_battery_between_episodes: bool = False


def _take(section: dict, key: str, default):
    return section.pop(key, default)


def _node_config(section: dict, path: str, default: NodeEnergyConfig,
                 errors: list[str]) -> NodeEnergyConfig:
    try:
        cfg = NodeEnergyConfig(
            static_energy=float(_take(section, "static_kwh", default.static_energy)),
            dynamic_coeff=float(_take(section, "dynamic_kwh", default.dynamic_coeff)),
            panel_size=float(_take(section, "panel_units", default.panel_size)),
            battery_capacity=float(_take(section, "battery_kwh", default.battery_capacity)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"{path}: {exc}")
        return default
    for key in section:
        errors.append(f"{path}.{key}: unknown field")
    return cfg


def _tariff(section: Any, errors: list[str]) -> TariffSchedule:
    if section is None:
        return TariffSchedule.from_bands()
    if not isinstance(section, dict):
        errors.append("env.tariff: expected a mapping")
        return TariffSchedule.from_bands()
    section = dict(section)
    try:
        if "prices" in section:
            prices = section.pop("prices")
            tariff = TariffSchedule(tuple(float(p) for p in prices))
        else:
            tariff = TariffSchedule.from_bands(
                night=float(_take(section, "night", 0.03)),
                day=float(_take(section, "day", 0.07)),
                peak=float(_take(section, "peak", 0.11)),
            )
    except (TypeError, ValueError) as exc:
        errors.append(f"env.tariff: {exc}")
        return TariffSchedule.from_bands()
    for key in section:
        errors.append(f"env.tariff.{key}: unknown field")
    return tariff


def _traffic_types(section: Any, errors: list[str]) -> tuple[TrafficType, ...]:
    from .model import DEFAULT_TRAFFIC_TYPES

    if section is None:
        return DEFAULT_TRAFFIC_TYPES
    types = []
    for n, item in enumerate(section):
        item = dict(item)
        try:
            kind = TrafficKind(str(_take(item, "kind", "embb")).lower())
            types.append(TrafficType(
                kind=kind,
                pinned_to_du=bool(_take(item, "pinned_to_du", False)),
                load_scale=float(_take(item, "load_scale", 1.0)),
            ))
        except (TypeError, ValueError) as exc:
            errors.append(f"traffic.types[{n}]: {exc}")
            continue
        for key in item:
            errors.append(f"traffic.types[{n}].{key}: unknown field")
    return tuple(types) if types else DEFAULT_TRAFFIC_TYPES


def scenario_from_dict(data: dict | None) -> ScenarioConfig:
    data = dict(data or {})
    errors: list[str] = []

    env_sec = dict(data.pop("env", {}) or {})
    traffic_sec = dict(data.pop("traffic", {}) or {})
    solar_sec = dict(data.pop("solar", {}) or {})
    policy_sec = dict(data.pop("policy", {}) or {})
    run_sec = dict(data.pop("run", {}) or {})
    oracle_sec = dict(data.pop("oracle", {}) or {})
    for key in data:
        errors.append(f"{key}: unknown section")

    types = _traffic_types(traffic_sec.pop("types", None), errors)
    tariff = _tariff(env_sec.pop("tariff", None), errors)
    from .model import DEFAULT_CU_CONFIG, DEFAULT_DU_CONFIG

    cu_cfg = _node_config(dict(env_sec.pop("cu", {}) or {}), "env.cu", DEFAULT_CU_CONFIG, errors)
    du_cfg = _node_config(dict(env_sec.pop("du", {}) or {}), "env.du", DEFAULT_DU_CONFIG, errors)

    try:
        phases = traffic_sec.pop("phases", None)
        traffic = TrafficProfileConfig(
            nu=float(_take(traffic_sec, "nu", 7.0)),
            phases=tuple(float(p) for p in phases) if phases is not None else None,
            noise_sigma=float(_take(traffic_sec, "noise_sigma", 0.02)),
            seasonal_amplitude=float(_take(traffic_sec, "seasonal_amplitude", 0.3)),
            intensity=float(_take(traffic_sec, "intensity", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"traffic: {exc}")
        traffic = TrafficProfileConfig()
    for key in traffic_sec:
        errors.append(f"traffic.{key}: unknown field")

    reset_between = bool(_take(env_sec, "reset_battery_between_episodes", False))
    try:
        levels = _take(env_sec, "dispatch_levels", (0.0, 0.5, 1.0))
        env = EnvConfig(
            du_count=int(_take(env_sec, "du_count", 20)),
            chain=FunctionChain(int(_take(env_sec, "chain_functions", 4))),
            horizon=int(_take(env_sec, "horizon_hours", 24)),
            day_length=int(_take(env_sec, "day_length", 24)),
            tariff=tariff,
            cu=cu_cfg,
            du=du_cfg,
            types=types,
            dispatch_levels=tuple(float(v) for v in levels),
            reward_window=int(_take(env_sec, "reward_window", 48)),
            reward_scale=(None if (rs := _take(env_sec, "reward_scale", None)) is None else float(rs)),
            initial_battery_fraction=float(_take(env_sec, "initial_battery_fraction", 0.0)),
            max_load_per_type=tuple(ty.load_scale * traffic.intensity for ty in types),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"env: {exc}")
        env = EnvConfig(max_load_per_type=tuple(ty.load_scale for ty in types), types=types)
    for key in env_sec:
        errors.append(f"env.{key}: unknown field")

    du_traces = solar_sec.pop("du_traces", None)
    try:
        solar = SolarConfig(
            site=str(_take(solar_sec, "site", "synthetic")),
            trace=_take(solar_sec, "trace", None),
            cu_trace=_take(solar_sec, "cu_trace", None),
            du_traces=tuple(str(p) for p in du_traces) if du_traces is not None else None,
            peak_kwh_per_unit=float(_take(solar_sec, "peak_kwh_per_unit", 0.2)),
            sunrise=int(_take(solar_sec, "sunrise", 6)),
            sunset=int(_take(solar_sec, "sunset", 18)),
            cloud_sigma=float(_take(solar_sec, "cloud_sigma", 0.15)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"solar: {exc}")
        solar = SolarConfig()
    for key in solar_sec:
        errors.append(f"solar.{key}: unknown field")

    try:
        kinds_raw = _take(policy_sec, "kinds", None)
        if kinds_raw is None:
            single = _take(policy_sec, "kind", "rldfs_ql")
            kinds_raw = [single]
        kinds = tuple(PolicyKind(str(k).lower()) for k in kinds_raw)
    except ValueError as exc:
        errors.append(f"policy.kinds: {exc}")
        kinds = (PolicyKind.RLDFS_QL,)
    learning_sec = dict(policy_sec.pop("learning", {}) or {})
    try:
        learning = LearningParams(
            episodes=int(_take(learning_sec, "episodes", 4000)),
            learning_rate=float(_take(learning_sec, "learning_rate", 0.05)),
            discount=float(_take(learning_sec, "discount", 0.90)),
            epsilon_start=float(_take(learning_sec, "epsilon_start", 0.5)),
            epsilon_decay=float(_take(learning_sec, "epsilon_decay", 5e-5)),
            epsilon_floor=float(_take(learning_sec, "epsilon_floor", 0.01)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"policy.learning: {exc}")
        learning = LearningParams()
    for key in learning_sec:
        errors.append(f"policy.learning.{key}: unknown field")
    disc_sec = dict(policy_sec.pop("discretization", {}) or {})
    try:
        discretization = DiscretizationSpec(
            battery_bins=int(_take(disc_sec, "battery_bins", 4)),
            load_bins=int(_take(disc_sec, "load_bins", 3)),
            time_values=int(_take(disc_sec, "time_values", env.day_length)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"policy.discretization: {exc}")
        discretization = DiscretizationSpec()
    for key in disc_sec:
        errors.append(f"policy.discretization.{key}: unknown field")
    for key in policy_sec:
        errors.append(f"policy.{key}: unknown field")
    policy = PolicyConfig(kinds=kinds, learning=learning, discretization=discretization)

    try:
        seeds_raw = _take(run_sec, "seeds", [1])
        run = RunConfig(
            seeds=tuple(int(s) for s in seeds_raw),
            out_dir=str(_take(run_sec, "out_dir", "results")),
        )
        if not run.seeds:
            errors.append("run.seeds: need at least one seed")
    except (TypeError, ValueError) as exc:
        errors.append(f"run: {exc}")
        run = RunConfig()
    for key in run_sec:
        errors.append(f"run.{key}: unknown field")

    try:
        oracle = OracleConfig(
            horizon=int(_take(oracle_sec, "horizon", 4)),
            horizon_cap=int(_take(oracle_sec, "horizon_cap", 8)),
            du_cap=int(_take(oracle_sec, "du_cap", 2)),
            chain_cap=int(_take(oracle_sec, "chain_cap", 3)),
            battery_grid_step=float(_take(oracle_sec, "battery_grid_step", 0.5)),
            dispatch_mode=str(_take(oracle_sec, "dispatch_mode", "levels")),
            method=str(_take(oracle_sec, "method", "auto")),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"oracle: {exc}")
        oracle = OracleConfig()
    for key in oracle_sec:
        errors.append(f"oracle.{key}: unknown field")

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(env=env, traffic=traffic, solar=solar, policy=policy,
                          run=run, oracle=oracle,
                          reset_battery_between_episodes=reset_between)


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError([f"{path}: invalid YAML ({exc})"]) from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError([f"{path}: scenario must be a mapping"])
    return scenario_from_dict(data)


# ---------------------------------------------------------------------------
# materialization
# ---------------------------------------------------------------------------


def _solar_traces(sc: ScenarioConfig, seed: int, node_ids: tuple[str, ...]) -> dict[str, SolarTrace]:
    cfg = sc.solar
    horizon = sc.env.horizon
    if cfg.trace is None and cfg.cu_trace is None and cfg.du_traces is None:
        shared = synthetic_trace(cfg.peak_kwh_per_unit, cfg.sunrise, cfg.sunset,
                                 horizon, seed=seed, cloud_sigma=cfg.cloud_sigma,
                                 site_name=cfg.site)
        return {node: shared for node in node_ids}
    traces: dict[str, SolarTrace] = {}
    shared = load_trace(cfg.trace, horizon, site_name=cfg.site) if cfg.trace else None
    du_ids = [n for n in node_ids if n != "cu"]
    if cfg.du_traces is not None and len(cfg.du_traces) != len(du_ids):
        raise ConfigError([f"solar.du_traces: expected {len(du_ids)} paths, got {len(cfg.du_traces)}"])
    for n, node in enumerate(du_ids):
        if cfg.du_traces is not None:
            traces[node] = load_trace(cfg.du_traces[n], horizon, site_name=cfg.site)
        elif shared is not None:
            traces[node] = shared
        else:
            raise ConfigError(["solar: no trace covers the DUs"])
    if cfg.cu_trace is not None:
        traces["cu"] = load_trace(cfg.cu_trace, horizon, site_name=cfg.site)
    elif shared is not None:
        traces["cu"] = shared
    else:
        raise ConfigError(["solar: no trace covers the CU"])
    return traces


def build_env(sc: ScenarioConfig, seed: int) -> SimEnv:
    """Materialize the environment for one run seed (loads and solar are
    generated from named substreams of that seed)."""
    tcfg = replace(sc.traffic, seed=seed)
    loads = generate_load_matrix(tcfg, sc.env.horizon, sc.env.du_count, sc.env.types)
    node_ids = tuple(f"du{r:02d}" for r in range(sc.env.du_count)) + ("cu",)
    traces = _solar_traces(sc, seed, node_ids)
    return SimEnv(sc.env, loads, traces)


def build_oracle_instance(sc: ScenarioConfig, seed: int) -> OracleInstance:
    """Instance over the first `oracle.horizon` hours of the run's data."""
    env = build_env(sc, seed)
    o = sc.oracle
    t = o.horizon
    if t > sc.env.horizon:
        raise ConfigError([f"oracle.horizon: {t} exceeds env horizon {sc.env.horizon}"])
    r = sc.env.du_count
    prices = np.array([sc.env.tariff.price(tt) for tt in range(t)])
    frac = sc.env.initial_battery_fraction
    return OracleInstance(
        loads=env.loads_tri[:t].transpose(1, 2, 0).copy(),
        gen_du=env.gen[:t, :r].copy(),
        gen_cu=env.gen[:t, r].copy(),
        prices=prices,
        chain=sc.env.chain,
        types=sc.env.types,
        du_configs=sc.env.du_configs,
        cu_config=sc.env.cu,
        dispatch_levels=sc.env.dispatch_levels,
        b0_du=tuple(frac * c.battery_capacity for c in sc.env.du_configs),
        b0_cu=frac * sc.env.cu.battery_capacity,
        horizon_cap=o.horizon_cap,
        du_cap=o.du_cap,
        chain_cap=o.chain_cap,
        battery_grid_step=o.battery_grid_step,
        dispatch_mode=o.dispatch_mode,
        method=o.method,
    )
