"""Experiment orchestration behind the CLI: train, evaluate, sweep, oracle.

Every output CSV goes through an atomic write and formats floats with
repr(), so identical (config, seed) pairs reproduce byte-identical files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .agents import QTable, TrainResult, train
from .baselines import PolicyKind
from .env import EPISODE_LOG_HEADER
from .oracle import OracleSolution, solve_oracle
from .scenario import ScenarioConfig, build_env, build_oracle_instance

__all__ = [
    "RolloutResult",
    "train_run",
    "rollout_policy",
    "evaluate_run",
    "sweep_run",
    "oracle_run",
    "SUMMARY_HEADER",
    "SWEEP_HEADER",
    "CURVE_HEADER",
]

SUMMARY_HEADER = "policy,city,traffic_rate,total_opex,renewable_used,unstored"
SWEEP_HEADER = "axis,value,policy,total_opex"
CURVE_HEADER = "episode,total_opex"

_POLICY_CODES = {PolicyKind.DRAN: kernels.POLICY_DRAN, PolicyKind.CRAN: kernels.POLICY_CRAN}


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


@dataclass
class RolloutResult:
    node_ids: tuple[str, ...]
    energy: np.ndarray     # (T, R+1)
    dispatch: np.ndarray
    unstored: np.ndarray
    battery: np.ndarray
    opex: np.ndarray       # (T,)
    prices: np.ndarray

    @property
    def total_opex(self) -> float:
        return float(self.opex.sum())

    @property
    def renewable_used(self) -> float:
        return float(self.dispatch.sum())

    @property
    def total_unstored(self) -> float:
        return float(self.unstored.sum())

    def log_text(self) -> str:
        lines = [EPISODE_LOG_HEADER]
        for t in range(self.opex.shape[0]):
            for idx, node in enumerate(self.node_ids):
                lines.append(
                    f"{t},{node},{float(self.energy[t, idx])!r},"
                    f"{float(self.dispatch[t, idx])!r},{float(self.unstored[t, idx])!r},"
                    f"{float(self.prices[t])!r},{float(self.opex[t])!r}")
        return "\n".join(lines) + "\n"


def _stack_tables(env, tables: dict[str, QTable]):
    r = env.config.du_count
    q_du = np.stack([tables[env.node_ids[i]].q for i in range(r)])
    q_cu = tables["cu"].q
    return np.ascontiguousarray(q_du), np.ascontiguousarray(q_cu)


def rollout_policy(sc: ScenarioConfig, seed: int, kind: PolicyKind,
                   tables: dict[str, QTable] | None = None,
                   explicit: tuple[np.ndarray, np.ndarray] | None = None) -> RolloutResult:
    """Frozen-policy run over the scenario horizon (exploration off)."""
    env = build_env(sc, seed)
    arrays = kernels.pack_env_arrays(env)
    cfg = env.config
    t_len = cfg.horizon
    r = cfg.du_count
    spec = sc.policy.discretization

    if kind in _POLICY_CODES:
        code = _POLICY_CODES[kind]
        q_du = np.zeros((r, 1, 1))
        q_cu = np.zeros((1, 1))
    elif explicit is not None:
        code = kernels.POLICY_EXPLICIT
        q_du = np.zeros((r, 1, 1))
        q_cu = np.zeros((1, 1))
    elif kind.trained:
        if tables is None:
            raise ValueError(f"{kind.value} evaluation needs trained tables")
        code = kernels.POLICY_GREEDY
        q_du, q_cu = _stack_tables(env, tables)
    else:
        raise ValueError(f"policy {kind.value} cannot be rolled out directly")

    if explicit is not None:
        ext_du, ext_cu = explicit
    else:
        ext_du = np.zeros((1, r), dtype=np.int64)
        ext_cu = np.zeros(1, dtype=np.int64)

    frac = cfg.initial_battery_fraction
    b_du = frac * arrays.beta_du.copy()
    b_cu = np.array([frac * arrays.beta_cu])
    e_out = np.zeros((t_len, r + 1))
    p_out = np.zeros((t_len, r + 1))
    over_out = np.zeros((t_len, r + 1))
    b_out = np.zeros((t_len, r + 1))
    opex_out = np.zeros(t_len)
    act_du_out = np.zeros((t_len, r), dtype=np.int64)
    act_cu_out = np.zeros(t_len, dtype=np.int64)

    kernels.rollout_loop(
        code, t_len, cfg.day_length,
        arrays.loads, arrays.gen_du, arrays.gen_cu, arrays.price_day,
        arrays.es_du, arrays.ed_du, arrays.omega_du, arrays.beta_du,
        arrays.es_cu, arrays.ed_cu, arrays.omega_cu, arrays.beta_cu,
        cfg.chain.count, arrays.pinned, arrays.levels,
        arrays.max_load_du, arrays.max_load_cu,
        spec.battery_bins, spec.load_bins,
        b_du, b_cu, q_du, q_cu, ext_du, ext_cu,
        e_out, p_out, over_out, b_out, opex_out, act_du_out, act_cu_out,
    )
    prices = np.array([arrays.price_day[t % 24] for t in range(t_len)])
    return RolloutResult(env.node_ids, e_out, p_out, over_out, b_out, opex_out, prices)


def train_run(sc: ScenarioConfig, seed: int, kind: PolicyKind,
              out_dir: str | None = None) -> TrainResult:
    """Train one RL policy for one seed; optionally persist tables + curve."""
    if not kind.trained:
        raise ValueError(f"{kind.value} is not a trainable policy")
    env = build_env(sc, seed)
    result = train(env, kind.algorithm, sc.policy.learning, sc.policy.discretization,
                   seed=seed, reset_battery_between_episodes=sc.reset_battery_between_episodes)
    if out_dir is not None:
        art_dir = artifact_dir(out_dir, seed, kind)
        os.makedirs(art_dir, exist_ok=True)
        for node, table in result.tables.items():
            table.save_csv(os.path.join(art_dir, f"qtable_{node}.csv"))
        lines = [CURVE_HEADER]
        for ep, opex in enumerate(result.curve):
            lines.append(f"{ep},{float(opex)!r}")
        _atomic_write(os.path.join(art_dir, "curve.csv"), "\n".join(lines) + "\n")
    return result


def artifact_dir(out_dir: str, seed: int, kind: PolicyKind) -> str:
    return os.path.join(out_dir, f"seed{seed}", kind.value)


def load_tables(art_dir: str, node_ids: tuple[str, ...]) -> dict[str, QTable]:
    tables = {}
    for node in node_ids:
        path = os.path.join(art_dir, f"qtable_{node}.csv")
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing q-table artifact {path}")
        tables[node] = QTable.load_csv(path)
    return tables


def _check_table_dims(sc: ScenarioConfig, tables: dict[str, QTable]) -> None:
    from .agents import ActionCodec, build_cu_discretizer, build_du_discretizer

    spec = sc.policy.discretization
    codec = ActionCodec(sc.env.chain.count, len(sc.env.nonpinned_indices), len(sc.env.dispatch_levels))
    du_states = build_du_discretizer(sc.env, spec, 0).n_states
    cu_states = build_cu_discretizer(sc.env, spec).n_states
    for node, table in tables.items():
        want = (cu_states, len(sc.env.dispatch_levels)) if node == "cu" else (du_states, codec.n_actions)
        if table.q.shape != want:
            raise ValueError(
                f"{node}: q-table shape {table.q.shape} does not match discretization {want}")


def evaluate_run(sc: ScenarioConfig, out_dir: str, artifacts_dir: str | None = None,
                 kinds: tuple[PolicyKind, ...] | None = None,
                 train_missing: bool = False) -> list[str]:
    """Frozen-policy evaluation for every (policy, seed); returns summary rows.

    Trained policies read their tables from `artifacts_dir` (training them
    on the fly when `train_missing` is set), static baselines need nothing.
    """
    kinds = kinds or sc.policy.kinds
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    node_ids = tuple(f"du{r:02d}" for r in range(sc.env.du_count)) + ("cu",)
    for kind in kinds:
        if kind is PolicyKind.ORACLE:
            raise ValueError("the oracle runs through the `oracle` subcommand, not evaluate")
        for seed in sc.run.seeds:
            tables = None
            if kind.trained:
                art = artifact_dir(artifacts_dir or out_dir, seed, kind)
                if train_missing and not os.path.isdir(art):
                    train_run(sc, seed, kind, out_dir=artifacts_dir or out_dir)
                tables = load_tables(art, node_ids)
                _check_table_dims(sc, tables)
            res = rollout_policy(sc, seed, kind, tables=tables)
            _atomic_write(os.path.join(out_dir, f"eval_{kind.value}_seed{seed}.csv"), res.log_text())
            rows.append(f"{kind.value},{sc.solar.site},{sc.traffic.intensity!r},"
                        f"{res.total_opex!r},{res.renewable_used!r},{res.total_unstored!r}")
    _atomic_write(os.path.join(out_dir, "summary.csv"),
                  "\n".join([SUMMARY_HEADER] + rows) + "\n")
    return rows


def _sweep_scenario(sc: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    env = sc.env
    if axis == "panel":
        base = env.du_configs[0].panel_size
        if base <= 0:
            raise ValueError("panel sweep needs a positive baseline DU panel size")
        cu = replace(env.cu, panel_size=env.cu.panel_size * (value / base))
        du = replace(env.du_configs[0], panel_size=value)
        return replace(sc, env=replace(env, cu=cu, du=du))
    if axis == "battery":
        base = env.du_configs[0].battery_capacity
        if base <= 0:
            raise ValueError("battery sweep needs a positive baseline DU battery")
        cu = replace(env.cu, battery_capacity=env.cu.battery_capacity * (value / base))
        du = replace(env.du_configs[0], battery_capacity=value)
        return replace(sc, env=replace(env, cu=cu, du=du))
    if axis == "traffic":
        traffic = replace(sc.traffic, intensity=value)
        env2 = replace(env, max_load_per_type=tuple(ty.load_scale * value for ty in env.types))
        return replace(sc, traffic=traffic, env=env2)
    raise ValueError(f"unknown sweep axis {axis!r} (panel, battery or traffic)")


def sweep_run(sc: ScenarioConfig, axis: str, values, out_dir: str,
              kinds: tuple[PolicyKind, ...] | None = None) -> list[str]:
    """Cross-product sweep; total_opex is the median over the run seeds."""
    kinds = kinds or sc.policy.kinds
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for value in values:
        if value <= 0:
            raise ValueError(f"sweep values must be positive, got {value}")
        sc_v = _sweep_scenario(sc, axis, float(value))
        for kind in kinds:
            totals = []
            for seed in sc_v.run.seeds:
                if kind is PolicyKind.ORACLE:
                    totals.append(solve_oracle(build_oracle_instance(sc_v, seed)).total_opex)
                elif kind.trained:
                    result = train_run(sc_v, seed, kind)
                    totals.append(rollout_policy(sc_v, seed, kind, tables=result.tables).total_opex)
                else:
                    totals.append(rollout_policy(sc_v, seed, kind).total_opex)
            rows.append(f"{axis},{float(value)!r},{kind.value},{float(np.median(totals))!r}")
    _atomic_write(os.path.join(out_dir, "sweep.csv"), "\n".join([SWEEP_HEADER] + rows) + "\n")
    return rows


def oracle_run(sc: ScenarioConfig, out_dir: str) -> list[OracleSolution]:
    """Solve the configured desk-scale instance for every seed and write the
    optimum plus the optimal action sequence."""
    os.makedirs(out_dir, exist_ok=True)
    solutions = []
    summary = ["seed,total_opex,method"]
    for seed in sc.run.seeds:
        inst = build_oracle_instance(sc, seed)
        sol = solve_oracle(inst)
        solutions.append(sol)
        summary.append(f"{seed},{sol.total_opex!r},{sol.method_used}")
        lines = ["t,node,split_points,dispatch"]
        for t in range(inst.horizon):
            for r in range(inst.du_count):
                splits = "|".join(str(int(s)) for s in sol.splits[t, r])
                disp = int(sol.du_levels[t, r]) if sol.du_levels is not None else float(sol.dispatch_kwh[t, r])
                lines.append(f"{t},du{r:02d},{splits},{disp!r}")
            disp = int(sol.cu_levels[t]) if sol.cu_levels is not None else float(sol.dispatch_kwh[t, inst.du_count])
            lines.append(f"{t},cu,,{disp!r}")
        _atomic_write(os.path.join(out_dir, f"oracle_actions_seed{seed}.csv"), "\n".join(lines) + "\n")
    _atomic_write(os.path.join(out_dir, "oracle_summary.csv"), "\n".join(summary) + "\n")
    return solutions
