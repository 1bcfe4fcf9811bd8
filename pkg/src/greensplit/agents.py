"""Tabular Q-learning and SARSA agents over discretized observations.

Every node is an independent agent with its own table but all agents share
the global windowed reward, so credit assignment is implicit.  States pack
(battery bin, one load bin per traffic type, hour of day) into a single
index; DU actions pack (split point per non-pinned type, dispatch level).

Training runs as one continuous timeline chopped into day-long episodes:
the day-of-year advances cyclically through the generated data and battery
state carries across episode boundaries unless explicitly reset.  The hot
loop lives in `kernels` (numba-compiled unless disabled); this module owns
the table/arithmetic contracts and marshals data in and out.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from . import kernels
from .env import EnvConfig, Observation, SimEnv
from .util import substream

__all__ = [
    "DiscretizationSpec",
    "StateDiscretizer",
    "ActionCodec",
    "QTable",
    "LearningParams",
    "TrainResult",
    "q_update",
    "sarsa_update",
    "select_action",
    "epsilon_at",
    "train",
]

Algorithm = Literal["q_learning", "sarsa"]
QTABLE_FORMAT_VERSION = 1
QTABLE_HEADER = "state_bin,action,q,visits"


@dataclass(frozen=True)
class DiscretizationSpec:
    """Bin counts keeping the state space tabular-sized: equal-width battery
    bins over [0, capacity], load bins as fractions of the configured max
    load, and one state per hour of day."""

    battery_bins: int = 4
    load_bins: int = 3
    time_values: int = 24

    def __post_init__(self):
        if self.battery_bins < 1 or self.load_bins < 1 or self.time_values < 1:
            raise ValueError("all bin counts must be >= 1")


class StateDiscretizer:
    """Total map from continuous observations to state indices for one node.

    All bins are right-open except the last, which absorbs values at or
    beyond the configured maximum (noise can push loads past their nominal
    peak).
    """

    def __init__(self, spec: DiscretizationSpec, battery_capacity: float,
                 max_loads: Sequence[float], day_length: int):
        if day_length != spec.time_values:
            raise ValueError(
                f"time_values ({spec.time_values}) must equal the day length ({day_length})")
        self.spec = spec
        self.battery_capacity = float(battery_capacity)
        self.max_loads = tuple(float(m) for m in max_loads)
        self.day_length = day_length
        self.n_states = spec.battery_bins * spec.load_bins ** len(self.max_loads) * spec.time_values

    @staticmethod
    def _bin(value: float, maximum: float, bins: int) -> int:
        if maximum <= 0:
            return 0
        b = int(value / maximum * bins)
        return min(bins - 1, max(0, b))

    def index(self, obs: Observation) -> int:
        if len(obs.loads) != len(self.max_loads):
            raise ValueError(f"expected {len(self.max_loads)} load entries, got {len(obs.loads)}")
        idx = self._bin(obs.battery_kwh, self.battery_capacity, self.spec.battery_bins)
        for load, max_load in zip(obs.loads, self.max_loads):
            idx = idx * self.spec.load_bins + self._bin(load, max_load, self.spec.load_bins)
        return idx * self.spec.time_values + obs.time_of_day % self.day_length


class ActionCodec:
    """Flat action indices for one node kind.

    DU: index = (mixed-radix split points over non-pinned types) * n_levels
    + level.  CU: index = level.
    """

    def __init__(self, chain_count: int, nonpinned_count: int, n_levels: int):
        self.chain_count = chain_count
        self.nonpinned_count = nonpinned_count
        self.n_levels = n_levels
        self.n_actions = (chain_count + 1) ** nonpinned_count * n_levels

    def encode(self, split_points: Sequence[int], level: int) -> int:
        if len(split_points) != self.nonpinned_count:
            raise ValueError(f"need {self.nonpinned_count} split points, got {len(split_points)}")
        idx = 0
        for k in split_points:
            if not 0 <= k <= self.chain_count:
                raise ValueError(f"split point {k} outside [0, {self.chain_count}]")
            idx = idx * (self.chain_count + 1) + k
        if not 0 <= level < self.n_levels:
            raise ValueError(f"level {level} outside [0, {self.n_levels})")
        return idx * self.n_levels + level

    def decode(self, action: int) -> tuple[tuple[int, ...], int]:
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} outside [0, {self.n_actions})")
        level = action % self.n_levels
        idx = action // self.n_levels
        splits = []
        for _ in range(self.nonpinned_count):
            splits.append(idx % (self.chain_count + 1))
            idx //= self.chain_count + 1
        return tuple(reversed(splits)), level


@dataclass
class QTable:
    """Dense action-value table with visit counts, default zero."""

    q: np.ndarray
    visits: np.ndarray

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "QTable":
        return cls(np.zeros((n_states, n_actions)), np.zeros((n_states, n_actions), dtype=np.int64))

    @property
    def n_states(self) -> int:
        return self.q.shape[0]

    @property
    def n_actions(self) -> int:
        return self.q.shape[1]

    def greedy(self, state: int) -> int:
        """Greedy action, ties broken by lowest index; pure in the table."""
        return int(np.argmax(self.q[state]))

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# greensplit-qtable v{QTABLE_FORMAT_VERSION} "
                     f"states={self.n_states} actions={self.n_actions}\n")
            fh.write(QTABLE_HEADER + "\n")
            for s in range(self.n_states):
                for a in range(self.n_actions):
                    fh.write(f"{s},{a},{float(self.q[s, a])!r},{int(self.visits[s, a])}\n")

    @classmethod
    def load_csv(cls, path) -> "QTable":
        with open(path) as fh:
            meta = fh.readline().strip()
            if not meta.startswith("# greensplit-qtable v"):
                raise ValueError(f"{path}: not a q-table file")
            version = int(meta.split("v")[1].split()[0])
            if version != QTABLE_FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported q-table version {version}")
            fields = dict(part.split("=") for part in meta.split()[3:])
            table = cls.zeros(int(fields["states"]), int(fields["actions"]))
            header = fh.readline().strip()
            if header != QTABLE_HEADER:
                raise ValueError(f"{path}: unexpected header {header!r}")
            for line in fh:
                s, a, qv, n = line.strip().split(",")
                table.q[int(s), int(a)] = float(qv)
                table.visits[int(s), int(a)] = int(n)
        return table


@dataclass(frozen=True)
class LearningParams:
    episodes: int = 4000
    learning_rate: float = 0.05
    discount: float = 0.90
    epsilon_start: float = 0.5
    epsilon_decay: float = 5e-5
    epsilon_floor: float = 0.01

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ValueError(f"learning rate must be in (0, 1], got {self.learning_rate}")
        if not 0 <= self.discount < 1:
            raise ValueError(f"discount must be in [0, 1), got {self.discount}")
        for fname in ("epsilon_start", "epsilon_floor"):
            if not 0 <= getattr(self, fname) <= 1:
                raise ValueError(f"{fname} must be in [0, 1]")
        if self.epsilon_decay < 0 or self.episodes < 0:
            raise ValueError("epsilon_decay and episodes must be >= 0")


def epsilon_at(step: int, params: LearningParams) -> float:
    """Linear per-environment-step exploration decay with a floor."""
    return max(params.epsilon_floor, params.epsilon_start - params.epsilon_decay * step)


def q_update(table: QTable, s: int, a: int, reward: float, s_next: int,
             params: LearningParams) -> float:
    """Off-policy update toward reward + discounted best next value."""
    target = reward + params.discount * float(np.max(table.q[s_next]))
    table.q[s, a] += params.learning_rate * (target - table.q[s, a])
    table.visits[s, a] += 1
    return float(table.q[s, a])


def sarsa_update(table: QTable, s: int, a: int, reward: float, s_next: int,
                 a_next: int, params: LearningParams) -> float:
    """On-policy update toward reward + discounted value of the action the
    behavior policy actually takes next."""
    target = reward + params.discount * float(table.q[s_next, a_next])
    table.q[s, a] += params.learning_rate * (target - table.q[s, a])
    table.visits[s, a] += 1
    return float(table.q[s, a])


def select_action(table: QTable, s: int, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy: explore uniformly with probability epsilon, otherwise
    the greedy action with ties broken by lowest index."""
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(table.n_actions))
    return table.greedy(s)


@dataclass
class TrainResult:
    tables: dict[str, QTable]
    curve: np.ndarray  # per-episode total opex
    algorithm: Algorithm
    params: LearningParams
    discretization: DiscretizationSpec
    final_batteries: dict[str, float]


def build_du_discretizer(config: EnvConfig, spec: DiscretizationSpec, du: int) -> StateDiscretizer:
    return StateDiscretizer(spec, config.du_configs[du].battery_capacity,
                            config.max_loads, config.day_length)


def build_cu_discretizer(config: EnvConfig, spec: DiscretizationSpec) -> StateDiscretizer:
    cu_max = tuple(m * config.du_count for m in config.max_loads)
    return StateDiscretizer(spec, config.cu.battery_capacity, cu_max, config.day_length)


def train(env: SimEnv, algorithm: Algorithm, params: LearningParams | None = None,
          discretization: DiscretizationSpec | None = None, seed: int = 0,
          reset_battery_between_episodes: bool = False) -> TrainResult:
    """Train one agent set with day-long episodes cycling through env data.

    Exploration randomness comes from the run's "exploration" substream; a
    fixed (env data, seed) pair reproduces the learning curve bit-exactly.
    Returns the per-agent tables and the per-episode total-opex curve.
    """
    params = params or LearningParams()
    spec = discretization or DiscretizationSpec()
    cfg = env.config
    if cfg.horizon % cfg.day_length != 0 or cfg.horizon < cfg.day_length:
        raise ValueError("training needs a horizon that is a whole number of days")

    arrays = kernels.pack_env_arrays(env)
    n_agents = cfg.du_count + 1
    codec = ActionCodec(cfg.chain.count, len(cfg.nonpinned_indices), len(cfg.dispatch_levels))
    du_disc = build_du_discretizer(cfg, spec, 0)
    cu_disc = build_cu_discretizer(cfg, spec)

    q_du = np.zeros((cfg.du_count, du_disc.n_states, codec.n_actions))
    n_du = np.zeros_like(q_du, dtype=np.int64)
    q_cu = np.zeros((cu_disc.n_states, len(cfg.dispatch_levels)))
    n_cu = np.zeros_like(q_cu, dtype=np.int64)

    total_steps = params.episodes * cfg.day_length
    rng = substream(seed, "exploration")
    u_explore = rng.random((total_steps, n_agents)) if total_steps else np.zeros((0, n_agents))
    u_action = rng.random((total_steps, n_agents)) if total_steps else np.zeros((0, n_agents))

    curve = np.zeros(params.episodes)
    b_du = np.full(cfg.du_count, cfg.initial_battery_fraction) * arrays.beta_du
    b_cu = np.array([cfg.initial_battery_fraction * cfg.cu.battery_capacity])

    kernels.train_loop(
        0 if algorithm == "q_learning" else 1,
        params.episodes, cfg.day_length,
        arrays.loads, arrays.gen_du, arrays.gen_cu, arrays.price_day,
        arrays.es_du, arrays.ed_du, arrays.omega_du, arrays.beta_du,
        arrays.es_cu, arrays.ed_cu, arrays.omega_cu, arrays.beta_cu,
        cfg.chain.count, arrays.pinned, arrays.levels,
        arrays.max_load_du, arrays.max_load_cu,
        spec.battery_bins, spec.load_bins,
        params.learning_rate, params.discount,
        params.epsilon_start, params.epsilon_decay, params.epsilon_floor,
        cfg.reward_window, cfg.psi(),
        b_du.copy(), float(b_cu[0]), reset_battery_between_episodes,
        b_du, b_cu,
        q_du, n_du, q_cu, n_cu,
        u_explore, u_action, curve,
    )

    tables = {}
    final = {}
    for r in range(cfg.du_count):
        tables[env.node_ids[r]] = QTable(q_du[r], n_du[r])
        final[env.node_ids[r]] = float(b_du[r])
    tables["cu"] = QTable(q_cu, n_cu)
    final["cu"] = float(b_cu[0])
    return TrainResult(tables, curve, algorithm, params, spec, final)
