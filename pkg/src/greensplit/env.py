"""Hourly simulation environment.

A step applies one action per agent in a fixed order: DU actions pin the
splits, loads and splits give each node's energy, dispatch levels convert to
renewable draw p as a fraction of the feasible maximum (which guarantees
p <= E and p <= stored + inflow), then batteries advance with capacity
clipping and overflow accounted as unstored energy.  The step emits a record
carrying everything needed to recompute its grid cost.

DUs act before the CU because the CU's consumption is whatever chain
remainder the DUs did not keep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .model import (
    DEFAULT_CU_CONFIG,
    DEFAULT_DU_CONFIG,
    DEFAULT_TARIFF,
    DEFAULT_TRAFFIC_TYPES,
    FunctionChain,
    LoadMatrix,
    NodeEnergyConfig,
    TariffSchedule,
    TrafficType,
    cu_energy,
    du_energy,
    step_opex,
)
from .solar import SolarTrace

__all__ = [
    "BatteryState",
    "NodeAction",
    "StepRecord",
    "EnvConfig",
    "Observation",
    "SimEnv",
    "battery_step",
    "feasible_dispatch_max",
    "windowed_reward",
    "reference_energy",
    "EPISODE_LOG_HEADER",
]

EPISODE_LOG_HEADER = "t,node,E_kwh,p_kwh,unstored_kwh,price,opex"


@dataclass(frozen=True)
class BatteryState:
    """Stored energy with its capacity bound and cumulative overflow."""

    stored: float
    capacity: float
    unstored_total: float = 0.0

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {self.capacity}")
        if not 0 <= self.stored <= self.capacity:
            raise ValueError(f"stored {self.stored} outside [0, {self.capacity}]")


def battery_step(state: BatteryState, p: float, omega: float, g: float) -> BatteryState:
    """Advance one battery by one hour: draw p, harvest omega*g, clip at capacity.

    p beyond the available stored + inflow would drive the battery negative
    and is rejected; the environment never produces such a draw.
    """
    inflow = omega * g
    avail = state.stored + inflow
    if p < 0 or p > avail:
        raise ValueError(f"dispatch {p} outside available [0, {avail}]")
    x = (state.stored - p) + inflow
    if x < 0.0:  # float round-off when p == avail
        x = 0.0
    if x > state.capacity:
        overflow = x - state.capacity
        x = state.capacity
    else:
        overflow = 0.0
    return BatteryState(x, state.capacity, state.unstored_total + overflow)


def feasible_dispatch_max(state: BatteryState, omega: float, g: float, e_node: float) -> float:
    """Largest permissible renewable draw: capped by consumption and by what
    the battery plus this hour's harvest can supply."""
    if e_node < 0:
        raise ValueError(f"node energy must be >= 0, got {e_node}")
    return min(e_node, state.stored + omega * g)


@dataclass(frozen=True)
class NodeAction:
    """One agent's decision: split point per non-pinned traffic type (DU
    agents only; empty for the CU) and a dispatch level index."""

    dispatch_level: int
    split_points: tuple[int, ...] = ()


@dataclass(frozen=True)
class StepRecord:
    """Everything one step contributed to the bill, per node.

    Node order matches SimEnv.node_ids (du00..duNN, then cu); opex is the
    system-wide grid cost of the step.
    """

    t: int
    node_ids: tuple[str, ...]
    energy_kwh: np.ndarray
    dispatch_kwh: np.ndarray
    unstored_kwh: np.ndarray
    price: float
    opex: float


class Observation(NamedTuple):
    """Continuous agent view; discretization is the agent's concern."""

    battery_kwh: float
    loads: tuple[float, ...]
    time_of_day: int


def windowed_reward(records: Sequence[StepRecord], psi: float, window: int | None = None) -> float:
    """Shared reward: -psi times the opex summed over the trailing window.

    `window` counts lookback steps beyond the newest record (window + 1
    records total); at the start of a run fewer records than that may exist
    and the sum simply covers what is available.
    """
    if not records:
        raise ValueError("need at least one step record")
    if window is not None:
        records = records[-(window + 1):]
    total = 0.0
    for rec in records:
        total += rec.opex
    return -psi * total


@dataclass(frozen=True)
class EnvConfig:
    du_count: int = 20
    chain: FunctionChain = field(default_factory=lambda: FunctionChain(4))
    horizon: int = 24
    day_length: int = 24
    tariff: TariffSchedule = field(default_factory=lambda: DEFAULT_TARIFF)
    cu: NodeEnergyConfig = field(default_factory=lambda: DEFAULT_CU_CONFIG)
    du: tuple[NodeEnergyConfig, ...] | NodeEnergyConfig = field(default_factory=lambda: DEFAULT_DU_CONFIG)
    types: tuple[TrafficType, ...] = DEFAULT_TRAFFIC_TYPES
    dispatch_levels: tuple[float, ...] = (0.0, 0.5, 1.0)
    reward_window: int = 48
    reward_scale: float | None = None  # None -> 1 / ((window+1) * c_max * E_ref)
    initial_battery_fraction: float = 0.0
    max_load_per_type: tuple[float, ...] | None = None  # None -> types' load_scale

    def __post_init__(self):
        if self.du_count < 1:
            raise ValueError("need at least one DU")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.reward_window < 0:
            raise ValueError("reward window must be >= 0")
        if self.day_length < 1 or 24 % self.day_length != 0:
            raise ValueError("day_length must divide the 24-hour tariff indexing")
        if not 0 <= self.initial_battery_fraction <= 1:
            raise ValueError("initial battery fraction must be in [0, 1]")
        if not self.dispatch_levels:
            raise ValueError("need at least one dispatch level")
        if list(self.dispatch_levels) != sorted(set(self.dispatch_levels)):
            raise ValueError("dispatch levels must be strictly ascending")
        if self.dispatch_levels[0] < 0 or self.dispatch_levels[-1] > 1:
            raise ValueError("dispatch levels must lie in [0, 1]")

    @property
    def du_configs(self) -> tuple[NodeEnergyConfig, ...]:
        if isinstance(self.du, NodeEnergyConfig):
            return (self.du,) * self.du_count
        if len(self.du) != self.du_count:
            raise ValueError(f"{self.du_count} DUs need {self.du_count} energy configs")
        return tuple(self.du)

    @property
    def max_loads(self) -> tuple[float, ...]:
        if self.max_load_per_type is not None:
            return self.max_load_per_type
        return tuple(ty.load_scale for ty in self.types)

    @property
    def nonpinned_indices(self) -> tuple[int, ...]:
        return tuple(i for i, ty in enumerate(self.types) if not ty.pinned_to_du)

    def psi(self) -> float:
        if self.reward_scale is not None:
            return self.reward_scale
        c_max = max(self.tariff.price_per_hour)
        e_ref = reference_energy(self)
        return 1.0 / ((self.reward_window + 1) * c_max * e_ref)


def reference_energy(config: EnvConfig) -> float:
    """Static plus full-load dynamic energy of the whole system for one hour;
    anchors the default reward normalization so rewards sit near [-1, 0]."""
    f = config.chain.count
    peak = sum(config.max_loads)
    e = config.cu.static_energy + config.cu.dynamic_coeff * config.du_count * peak * f
    for du_cfg in config.du_configs:
        e += du_cfg.static_energy + du_cfg.dynamic_coeff * peak * f
    return e


class SimEnv:
    """Single-writer environment instance; distinct instances are independent.

    Node data (loads, per-unit generation) covers `config.horizon` hours;
    stepping past the horizon is an error.
    """

    def __init__(self, config: EnvConfig, loads: LoadMatrix,
                 solar: SolarTrace | Mapping[str, SolarTrace]):
        if loads.du_count != config.du_count:
            raise ValueError(f"load matrix covers {loads.du_count} DUs, config has {config.du_count}")
        if loads.types != tuple(config.types):
            raise ValueError("load matrix traffic types do not match config")
        if loads.horizon < config.horizon:
            raise ValueError(f"load matrix covers {loads.horizon} steps, horizon is {config.horizon}")
        self.config = config
        self.node_ids: tuple[str, ...] = tuple(
            f"du{r:02d}" for r in range(config.du_count)
        ) + ("cu",)
        # time-major copies for cheap stepping and for the compiled kernels
        self.loads_tri = np.ascontiguousarray(loads.values.transpose(2, 0, 1))
        self.gen = self._gen_matrix(solar)
        self.price_day = config.tariff.as_array()
        self._du_cfgs = config.du_configs
        self._split_buf = np.zeros((config.du_count, len(config.types)), dtype=np.int64)
        self.records: list[StepRecord] = []
        self.reset()

    def _gen_matrix(self, solar) -> np.ndarray:
        cfg = self.config
        if isinstance(solar, SolarTrace):
            traces = {node: solar for node in self.node_ids}
        else:
            traces = dict(solar)
            missing = [node for node in self.node_ids if node not in traces]
            if missing:
                raise ValueError(f"no solar trace for nodes: {missing}")
        gen = np.empty((cfg.horizon, cfg.du_count + 1), dtype=np.float64)
        for col, node in enumerate(self.node_ids):
            trace = traces[node]
            if trace.horizon < cfg.horizon:
                raise ValueError(f"solar trace for {node} covers {trace.horizon} steps, horizon is {cfg.horizon}")
            gen[:, col] = trace.values[:cfg.horizon]
        return gen

    # -- lifecycle ---------------------------------------------------------

    def reset(self) -> dict[str, Observation]:
        cfg = self.config
        self._t = 0
        self._batteries = [
            BatteryState(cfg.initial_battery_fraction * c.battery_capacity, c.battery_capacity)
            for c in self._du_cfgs
        ] + [BatteryState(cfg.initial_battery_fraction * cfg.cu.battery_capacity, cfg.cu.battery_capacity)]
        self.records = []
        return {node: self.observe(node) for node in self.node_ids}

    @property
    def t(self) -> int:
        return self._t

    @property
    def done(self) -> bool:
        return self._t >= self.config.horizon

    def battery(self, node: str) -> BatteryState:
        return self._batteries[self._node_index(node)]

    def _node_index(self, node: str) -> int:
        try:
            return self.node_ids.index(node)
        except ValueError:
            raise KeyError(f"unknown node {node!r}") from None

    # -- observations ------------------------------------------------------

    def observe(self, node: str) -> Observation:
        """Continuous view for one agent at the current step: own battery,
        current per-type load (system-wide totals for the CU), hour of day."""
        idx = self._node_index(node)
        t = min(self._t, self.config.horizon - 1)
        if node == "cu":
            loads = tuple(float(v) for v in self.loads_tri[t].sum(axis=0))
        else:
            loads = tuple(float(v) for v in self.loads_tri[t, idx])
        return Observation(self._batteries[idx].stored, loads, self._t % self.config.day_length)

    # -- stepping ----------------------------------------------------------

    def step(self, actions: Mapping[str, NodeAction]) -> tuple[dict[str, Observation], StepRecord]:
        cfg = self.config
        if self.done:
            raise RuntimeError(f"episode over: t={self._t} horizon={cfg.horizon}")
        extra = set(actions) - set(self.node_ids)
        if extra:
            raise KeyError(f"actions for unknown nodes: {sorted(extra)}")
        missing = set(self.node_ids) - set(actions)
        if missing:
            raise ValueError(f"missing actions for nodes: {sorted(missing)}")

        t = self._t
        f = cfg.chain.count
        price = float(self.price_day[t % 24])
        n_levels = len(cfg.dispatch_levels)
        nonpinned = cfg.nonpinned_indices

        # 1. DU actions fix the splits (pinned types keep the full chain).
        splits = self._split_buf
        for r in range(cfg.du_count):
            action = actions[self.node_ids[r]]
            if len(action.split_points) != len(nonpinned):
                raise ValueError(
                    f"{self.node_ids[r]}: need {len(nonpinned)} split points, got {len(action.split_points)}")
            for i in range(len(cfg.types)):
                splits[r, i] = f
            for j, i in enumerate(nonpinned):
                k = int(action.split_points[j])
                if not 0 <= k <= f:
                    raise ValueError(f"{self.node_ids[r]}: split point {k} outside [0, {f}]")
                splits[r, i] = k
        cu_action = actions["cu"]
        if cu_action.split_points:
            raise ValueError("the cu takes no split decision")

        # 2. Loads and splits give each node's energy.
        energy = np.empty(cfg.du_count + 1, dtype=np.float64)
        for r in range(cfg.du_count):
            energy[r] = du_energy(self.loads_tri[t, r], splits[r], self._du_cfgs[r], cfg.chain)
        energy[-1] = cu_energy(self.loads_tri[t], splits, cfg.cu, cfg.chain)

        # 3. Dispatch levels convert to p; 4. batteries advance.
        dispatch = np.empty(cfg.du_count + 1, dtype=np.float64)
        unstored = np.empty(cfg.du_count + 1, dtype=np.float64)
        omegas = [c.panel_size for c in self._du_cfgs] + [cfg.cu.panel_size]
        for idx, node in enumerate(self.node_ids):
            action = actions[node]
            if not 0 <= action.dispatch_level < n_levels:
                raise ValueError(f"{node}: dispatch level {action.dispatch_level} outside [0, {n_levels})")
            state = self._batteries[idx]
            g = float(self.gen[t, idx])
            fmax = feasible_dispatch_max(state, omegas[idx], g, float(energy[idx]))
            p = cfg.dispatch_levels[action.dispatch_level] * fmax
            before = state.unstored_total
            new_state = battery_step(state, p, omegas[idx], g)
            self._batteries[idx] = new_state
            dispatch[idx] = p
            unstored[idx] = new_state.unstored_total - before

        # 5. Record with the step's grid cost.
        opex = step_opex(float(energy[-1]), float(dispatch[-1]),
                         zip(energy[:-1], dispatch[:-1]), price)
        record = StepRecord(t, self.node_ids, energy, dispatch, unstored, price, opex)
        self.records.append(record)
        self._t += 1
        obs = {node: self.observe(node) for node in self.node_ids}
        return obs, record

    # -- bookkeeping -------------------------------------------------------

    def total_opex(self) -> float:
        return float(sum(rec.opex for rec in self.records))

    def export_log(self, path) -> None:
        """Per-step per-node CSV; `opex` repeats the step's system cost on
        every node row, so aggregate it per unique t."""
        with open(path, "w", newline="") as fh:
            fh.write(EPISODE_LOG_HEADER + "\n")
            for rec in self.records:
                for idx, node in enumerate(rec.node_ids):
                    fh.write(
                        f"{rec.t},{node},{float(rec.energy_kwh[idx])!r},"
                        f"{float(rec.dispatch_kwh[idx])!r},{float(rec.unstored_kwh[idx])!r},"
                        f"{float(rec.price)!r},{float(rec.opex)!r}\n")
