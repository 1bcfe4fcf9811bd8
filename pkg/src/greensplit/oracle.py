"""Exact small-instance minimizer of the total grid bill.

Used to verify the simulator and to bound what any policy can achieve.  Two
exact strategies share the instance format:

* ``enumerate`` — walk every split sequence per (DU, type, timestep); with
  splits fixed each node's dispatch decouples (its cost term (E - p) * c
  involves nobody else), so an independent per-node battery DP finishes the
  job.  Exponential in R * T, fine at desk scale.
* ``dp`` — joint dynamic program over time and battery level, pruned by
  exact dominance (more stored energy never costs more).  Requires at most
  one node with renewable supply (the others contribute split-dependent but
  dispatch-free cost), which lets it reach day-length horizons.

Dispatch follows the agents' discrete levels by default; ``grid`` mode
instead allows any multiple of the battery grid step (a tighter bound), and
then demands that capacities, initial charge and hourly inflows sit on that
grid.

The reported optimum is re-accumulated by replaying the chosen actions
step by step with the simulator's arithmetic, so it is directly comparable
with any other replayed run.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .env import NodeAction
from .model import FunctionChain, NodeEnergyConfig, TrafficType

__all__ = ["OracleInstance", "OracleSolution", "solve_oracle"]

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class OracleInstance:
    loads: np.ndarray            # (R, I, T) load-units
    gen_du: np.ndarray           # (T, R) kWh per panel-unit
    gen_cu: np.ndarray           # (T,)
    prices: np.ndarray           # (T,) $/kWh
    chain: FunctionChain
    types: tuple[TrafficType, ...]
    du_configs: tuple[NodeEnergyConfig, ...]
    cu_config: NodeEnergyConfig
    dispatch_levels: tuple[float, ...] = (0.0, 0.5, 1.0)
    b0_du: tuple[float, ...] = ()
    b0_cu: float = 0.0
    horizon_cap: int = 8
    du_cap: int = 2
    chain_cap: int = 3
    battery_grid_step: float = 0.5
    dispatch_mode: str = "levels"       # levels | grid
    method: str = "auto"                # auto | enumerate | dp
    enumeration_cap: int = 250_000      # split sequences the enumerator may walk
    frontier_cap: int = 500_000         # dominance-pruned states the dp may hold

    def __post_init__(self):
        object.__setattr__(self, "loads", np.asarray(self.loads, dtype=np.float64))
        object.__setattr__(self, "gen_du", np.asarray(self.gen_du, dtype=np.float64))
        object.__setattr__(self, "gen_cu", np.asarray(self.gen_cu, dtype=np.float64))
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=np.float64))
        if not self.b0_du:
            object.__setattr__(self, "b0_du", (0.0,) * self.loads.shape[0])

    @property
    def du_count(self) -> int:
        return self.loads.shape[0]

    @property
    def horizon(self) -> int:
        return self.loads.shape[2]

    @property
    def nonpinned(self) -> tuple[int, ...]:
        return tuple(i for i, ty in enumerate(self.types) if not ty.pinned_to_du)


@dataclass
class OracleSolution:
    total_opex: float
    splits: np.ndarray             # (T, R, I) split points, pinned included
    du_levels: np.ndarray | None   # (T, R) level indices (levels mode)
    cu_levels: np.ndarray | None   # (T,)
    dispatch_kwh: np.ndarray       # (T, R+1) replayed renewable draw
    method_used: str

    def node_actions(self, instance: OracleInstance, t: int) -> dict[str, NodeAction]:
        """Env-compatible actions for step t (levels mode only)."""
        if self.du_levels is None or self.cu_levels is None:
            raise ValueError("grid-mode solutions carry raw dispatch, not level actions")
        actions: dict[str, NodeAction] = {}
        for r in range(instance.du_count):
            splits = tuple(int(self.splits[t, r, i]) for i in instance.nonpinned)
            actions[f"du{r:02d}"] = NodeAction(int(self.du_levels[t, r]), splits)
        actions["cu"] = NodeAction(int(self.cu_levels[t]))
        return actions


def _validate(inst: OracleInstance) -> None:
    r, n_types, t = inst.loads.shape
    if r > inst.du_cap:
        raise ValueError(f"instance too large: {r} DUs exceeds cap {inst.du_cap}")
    if inst.chain.count > inst.chain_cap:
        raise ValueError(f"instance too large: chain {inst.chain.count} exceeds cap {inst.chain_cap}")
    if t > inst.horizon_cap:
        raise ValueError(f"instance too large: horizon {t} exceeds cap {inst.horizon_cap}")
    if n_types != len(inst.types):
        raise ValueError("load matrix type axis does not match declared types")
    if inst.gen_du.shape != (t, r) or inst.gen_cu.shape != (t,) or inst.prices.shape != (t,):
        raise ValueError("generation/price arrays do not match the load horizon")
    if len(inst.du_configs) != r or len(inst.b0_du) != r:
        raise ValueError("per-DU configs/initial batteries do not match the DU count")
    if inst.loads.min() < 0 or inst.gen_du.min() < 0 or inst.gen_cu.min() < 0 or inst.prices.min() < 0:
        raise ValueError("loads, generation and prices must be >= 0")
    if inst.dispatch_mode not in ("levels", "grid"):
        raise ValueError(f"unknown dispatch mode {inst.dispatch_mode!r}")
    if inst.method not in ("auto", "enumerate", "dp"):
        raise ValueError(f"unknown method {inst.method!r}")
    if inst.dispatch_mode == "grid":
        delta = inst.battery_grid_step
        if delta <= 0:
            raise ValueError("battery grid step must be > 0")
        quantities = [("initial cu battery", inst.b0_cu), ("cu capacity", inst.cu_config.battery_capacity)]
        for rr in range(r):
            quantities.append((f"du{rr} initial battery", inst.b0_du[rr]))
            quantities.append((f"du{rr} capacity", inst.du_configs[rr].battery_capacity))
            for tt in range(t):
                quantities.append((f"du{rr} inflow at t={tt}",
                                   inst.du_configs[rr].panel_size * inst.gen_du[tt, rr]))
        for tt in range(t):
            quantities.append((f"cu inflow at t={tt}", inst.cu_config.panel_size * inst.gen_cu[tt]))
        for name, value in quantities:
            if abs(value / delta - round(value / delta)) > _GRID_TOL:
                raise ValueError(f"off-grid quantity detected: {name} = {value} not a multiple of {delta}")


# ---------------------------------------------------------------------------
# shared arithmetic (kept in lockstep with env.SimEnv / kernels)
# ---------------------------------------------------------------------------


def _energies_at(inst: OracleInstance, t: int, k_split: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-node energies for one step given full (R, I) split points."""
    f = inst.chain.count
    e_du = np.empty(inst.du_count)
    for r in range(inst.du_count):
        e = inst.du_configs[r].static_energy
        for i in range(len(inst.types)):
            e += inst.loads[r, i, t] * k_split[r, i] * inst.du_configs[r].dynamic_coeff
        e_du[r] = e
    e_cu = inst.cu_config.static_energy
    for r in range(inst.du_count):
        for i in range(len(inst.types)):
            e_cu += inst.loads[r, i, t] * (f - k_split[r, i]) * inst.cu_config.dynamic_coeff
    return e_du, e_cu


def _battery_advance(b: float, p: float, inflow: float, beta: float) -> tuple[float, float]:
    x = (b - p) + inflow
    if x < 0.0:
        x = 0.0
    if x > beta:
        return beta, x - beta
    return x, 0.0


def _replay(inst: OracleInstance, splits: np.ndarray,
            du_levels: np.ndarray | None, cu_levels: np.ndarray | None,
            p_raw: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Re-accumulate the bill of an action sequence with simulator arithmetic."""
    levels = inst.dispatch_levels
    t_len = inst.horizon
    b_du = [float(v) for v in inst.b0_du]
    b_cu = inst.b0_cu
    dispatch = np.zeros((t_len, inst.du_count + 1))
    total = 0.0
    for t in range(t_len):
        e_du, e_cu = _energies_at(inst, t, splits[t])
        for r in range(inst.du_count):
            inflow = inst.du_configs[r].panel_size * inst.gen_du[t, r]
            avail = b_du[r] + inflow
            fmax = e_du[r] if e_du[r] < avail else avail
            p = levels[du_levels[t, r]] * fmax if p_raw is None else float(p_raw[t, r])
            b_du[r], _ = _battery_advance(b_du[r], p, inflow, inst.du_configs[r].battery_capacity)
            dispatch[t, r] = p
        inflow = inst.cu_config.panel_size * inst.gen_cu[t]
        avail = b_cu + inflow
        fmax = e_cu if e_cu < avail else avail
        p_cu = levels[cu_levels[t]] * fmax if p_raw is None else float(p_raw[t, inst.du_count])
        b_cu, _ = _battery_advance(b_cu, p_cu, inflow, inst.cu_config.battery_capacity)
        dispatch[t, inst.du_count] = p_cu
        resid = e_cu - p_cu
        for r in range(inst.du_count):
            resid += e_du[r] - dispatch[t, r]
        total += resid * inst.prices[t]
    return float(total), dispatch


# ---------------------------------------------------------------------------
# per-node dispatch optimization (splits already fixed)
# ---------------------------------------------------------------------------


def _prune_frontier(entries: list[tuple]) -> list[tuple]:
    """Exact dominance prune on (battery, cost): keep the staircase where
    more stored energy strictly buys lower cost.  Cost-to-go is non-increasing
    in the battery level, so dropping dominated states preserves the optimum."""
    entries.sort(key=lambda e: (-e[0], e[1]))
    kept: list[tuple] = []
    best_cost = float("inf")
    for entry in entries:
        if entry[1] < best_cost:
            kept.append(entry)
            best_cost = entry[1]
    return kept


def _dispatch_dp_levels(e_seq, omega, beta, b0, gen_seq, prices, levels, frontier_cap):
    """Best dispatch-level sequence for one node; exact reachable-set DP."""
    t_len = len(e_seq)
    layers = [[(b0, 0.0, -1, -1)]]  # (battery, cost, parent, level)
    for t in range(t_len):
        inflow = omega * gen_seq[t]
        nxt = []
        for eid, (b, cost, _, _) in enumerate(layers[t]):
            avail = b + inflow
            e = e_seq[t]
            fmax = e if e < avail else avail
            for li in range(len(levels)):
                p = levels[li] * fmax
                b2, _ = _battery_advance(b, p, inflow, beta)
                nxt.append((b2, cost + (e - p) * prices[t], eid, li))
        pruned = _prune_frontier(nxt)
        if len(pruned) > frontier_cap:
            raise ValueError(f"instance too large: dispatch frontier {len(pruned)} exceeds cap")
        layers.append(pruned)
    best_idx = min(range(len(layers[-1])), key=lambda i: (layers[-1][i][1], i))
    choice = np.zeros(t_len, dtype=np.int64)
    idx = best_idx
    for t in range(t_len - 1, -1, -1):
        _, _, parent, level = layers[t + 1][idx]
        choice[t] = level
        idx = parent
    return layers[-1][best_idx][1], choice


def _dispatch_dp_grid(e_seq, omega, beta, b0, gen_seq, prices, delta):
    """Best gridded dispatch for one node: p any multiple of delta up to the
    feasible maximum; battery levels live exactly on the grid."""
    nb = int(round(beta / delta)) + 1
    b0_g = int(round(b0 / delta))
    inf = float("inf")
    cost = np.full(nb, inf)
    cost[min(b0_g, nb - 1)] = 0.0
    t_len = len(e_seq)
    parent = np.full((t_len, nb), -1, dtype=np.int64)
    taken = np.zeros((t_len, nb), dtype=np.int64)
    for t in range(t_len):
        inflow_g = int(round(omega * gen_seq[t] / delta))
        new_cost = np.full(nb, inf)
        e = e_seq[t]
        e_cap_g = int(e / delta + _GRID_TOL)
        for bg in range(nb):
            if cost[bg] == inf:
                continue
            avail_g = bg + inflow_g
            pmax_g = min(avail_g, e_cap_g)
            for pg in range(pmax_g + 1):
                xg = avail_g - pg
                if xg > nb - 1:
                    xg = nb - 1
                c = cost[bg] + (e - pg * delta) * prices[t]
                if c < new_cost[xg]:
                    new_cost[xg] = c
                    parent[t, xg] = bg
                    taken[t, xg] = pg
        cost = new_cost
    best_g = int(np.argmin(cost))
    p_seq = np.zeros(t_len)
    g = best_g
    for t in range(t_len - 1, -1, -1):
        p_seq[t] = taken[t, g] * delta
        g = parent[t, g]
    return float(cost[best_g]), p_seq


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------


def _split_combos(inst: OracleInstance) -> list[np.ndarray]:
    """All per-step (R, I) split matrices; pinned types stay at chain length."""
    f = inst.chain.count
    nonpinned = inst.nonpinned
    combos = []
    for assignment in itertools.product(range(f + 1), repeat=len(nonpinned) * inst.du_count):
        k = np.full((inst.du_count, len(inst.types)), f, dtype=np.int64)
        pos = 0
        for r in range(inst.du_count):
            for i in nonpinned:
                k[r, i] = assignment[pos]
                pos += 1
        combos.append(k)
    return combos


def _solve_enumerate(inst: OracleInstance) -> OracleSolution:
    t_len = inst.horizon
    per_step = _split_combos(inst)
    n_seq = len(per_step) ** t_len
    if n_seq > inst.enumeration_cap:
        raise ValueError(
            f"instance too large: {n_seq} split sequences exceeds cap {inst.enumeration_cap}")

    best_cost = float("inf")
    best: tuple | None = None
    e_du_seq = np.zeros((t_len, inst.du_count))
    e_cu_seq = np.zeros(t_len)
    for seq in itertools.product(range(len(per_step)), repeat=t_len):
        for t in range(t_len):
            e_du_seq[t], e_cu_seq[t] = _energies_at(inst, t, per_step[seq[t]])
        total = 0.0
        node_choices = []
        for r in range(inst.du_count):
            cfg = inst.du_configs[r]
            if inst.dispatch_mode == "levels":
                c, choice = _dispatch_dp_levels(
                    e_du_seq[:, r], cfg.panel_size, cfg.battery_capacity, inst.b0_du[r],
                    inst.gen_du[:, r], inst.prices, inst.dispatch_levels, inst.frontier_cap)
            else:
                c, choice = _dispatch_dp_grid(
                    e_du_seq[:, r], cfg.panel_size, cfg.battery_capacity, inst.b0_du[r],
                    inst.gen_du[:, r], inst.prices, inst.battery_grid_step)
            total += c
            node_choices.append(choice)
        if inst.dispatch_mode == "levels":
            c, cu_choice = _dispatch_dp_levels(
                e_cu_seq, inst.cu_config.panel_size, inst.cu_config.battery_capacity, inst.b0_cu,
                inst.gen_cu, inst.prices, inst.dispatch_levels, inst.frontier_cap)
        else:
            c, cu_choice = _dispatch_dp_grid(
                e_cu_seq, inst.cu_config.panel_size, inst.cu_config.battery_capacity, inst.b0_cu,
                inst.gen_cu, inst.prices, inst.battery_grid_step)
        total += c
        if total < best_cost:
            best_cost = total
            best = (tuple(seq), [c.copy() for c in node_choices], cu_choice.copy())

    seq, node_choices, cu_choice = best
    splits = np.stack([per_step[s] for s in seq])
    if inst.dispatch_mode == "levels":
        du_levels = np.stack(node_choices, axis=1) if inst.du_count else np.zeros((t_len, 0), dtype=np.int64)
        cu_levels = cu_choice
        total, dispatch = _replay(inst, splits, du_levels, cu_levels)
        return OracleSolution(total, splits, du_levels, cu_levels, dispatch, "enumerate")
    p_raw = np.zeros((t_len, inst.du_count + 1))
    for r in range(inst.du_count):
        p_raw[:, r] = node_choices[r]
    p_raw[:, inst.du_count] = cu_choice
    total, dispatch = _replay(inst, splits, None, None, p_raw=p_raw)
    return OracleSolution(total, splits, None, None, dispatch, "enumerate")


def _live_node(inst: OracleInstance) -> int | None:
    """Index of the single node that can ever hold renewable energy
    (DUs 0..R-1, CU = R); None if every node is supply-free."""
    live = []
    for r in range(inst.du_count):
        if inst.du_configs[r].panel_size > 0 or inst.b0_du[r] > 0:
            live.append(r)
    if inst.cu_config.panel_size > 0 or inst.b0_cu > 0:
        live.append(inst.du_count)
    if len(live) > 1:
        raise ValueError(
            "instance too large: the dp strategy needs at most one node with renewable supply")
    return live[0] if live else None


def _solve_dp(inst: OracleInstance) -> OracleSolution:
    if inst.dispatch_mode != "levels":
        raise ValueError("the dp strategy supports levels dispatch only")
    t_len = inst.horizon
    live = _live_node(inst)
    combos = _split_combos(inst)
    levels = inst.dispatch_levels
    if live is None or live == inst.du_count:
        omega, beta, b0 = inst.cu_config.panel_size, inst.cu_config.battery_capacity, inst.b0_cu
        gen = inst.gen_cu
    else:
        cfg = inst.du_configs[live]
        omega, beta, b0 = cfg.panel_size, cfg.battery_capacity, inst.b0_du[live]
        gen = inst.gen_du[:, live]

    # entries: (battery, cost, parent, combo, live_level)
    layers = [[(b0, 0.0, -1, -1, -1)]]
    for t in range(t_len):
        inflow = omega * gen[t]
        price = inst.prices[t]
        energies = [_energies_at(inst, t, k) for k in combos]
        nxt = []
        for eid, (b, cost, _, _, _) in enumerate(layers[t]):
            avail = b + inflow
            for ci, (e_du, e_cu) in enumerate(energies):
                e_all = float(e_cu + e_du.sum())
                e_live = float(e_cu) if (live is None or live == inst.du_count) else float(e_du[live])
                fmax = e_live if e_live < avail else avail
                for li in range(len(levels)):
                    p = levels[li] * fmax
                    b2, _ = _battery_advance(b, p, inflow, beta)
                    nxt.append((b2, cost + (e_all - p) * price, eid, ci, li))
        pruned = _prune_frontier(nxt)
        if len(pruned) > inst.frontier_cap:
            raise ValueError(f"instance too large: dp frontier {len(pruned)} exceeds cap")
        layers.append(pruned)

    best_idx = min(range(len(layers[-1])), key=lambda i: (layers[-1][i][1], i))
    splits = np.zeros((t_len, inst.du_count, len(inst.types)), dtype=np.int64)
    du_levels = np.zeros((t_len, inst.du_count), dtype=np.int64)
    cu_levels = np.zeros(t_len, dtype=np.int64)
    idx = best_idx
    for t in range(t_len - 1, -1, -1):
        _, _, parent, ci, li = layers[t + 1][idx]
        splits[t] = combos[ci]
        if live is None or live == inst.du_count:
            cu_levels[t] = li
        else:
            du_levels[t, live] = li
        idx = parent
    total, dispatch = _replay(inst, splits, du_levels, cu_levels)
    return OracleSolution(total, splits, du_levels, cu_levels, dispatch, "dp")


def solve_oracle(instance: OracleInstance) -> OracleSolution:
    """Exact minimum grid bill and an optimal action sequence.

    Chooses the strategy per `instance.method`; "auto" prefers enumeration
    when the split-sequence count fits the cap, otherwise falls back to the
    single-battery dp.
    """
    _validate(instance)
    if instance.method == "enumerate":
        return _solve_enumerate(instance)
    if instance.method == "dp":
        return _solve_dp(instance)
    n_seq = (instance.chain.count + 1) ** (
        len(instance.nonpinned) * instance.du_count * instance.horizon)
    if n_seq <= instance.enumeration_cap:
        return _solve_enumerate(instance)
    return _solve_dp(instance)
