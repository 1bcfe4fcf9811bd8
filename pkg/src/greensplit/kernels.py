"""Hot numeric loops: multi-agent training and frozen-policy rollout.

Both kernels are written as self-contained scalar loops over plain numpy
arrays so the exact same source runs either numba-compiled (default) or as
pure Python/numpy.  Set GREENSPLIT_NUMBA=0 to force the fallback path; the
two paths execute identical float64 arithmetic in identical order, so their
outputs are bit-equal (benchmarks/bench_kernels.py measures the speed gap
and checks that equality).

The arithmetic mirrors env.SimEnv step for step; tests/test_kernels.py
pins the two implementations against each other bitwise.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EnvArrays",
    "pack_env_arrays",
    "train_loop",
    "rollout_loop",
    "using_numba",
    "pure_impls",
    "jitted_impls",
    "POLICY_GREEDY",
    "POLICY_DRAN",
    "POLICY_CRAN",
    "POLICY_EXPLICIT",
]

POLICY_GREEDY = 0
POLICY_DRAN = 1
POLICY_CRAN = 2
POLICY_EXPLICIT = 3


def numba_requested() -> bool:
    return os.environ.get("GREENSPLIT_NUMBA", "1").strip().lower() not in ("0", "false", "off", "no")


@dataclass(frozen=True)
class EnvArrays:
    """Flat, kernel-ready view of an environment's data and parameters."""

    loads: np.ndarray      # (T, R, I) load-units
    gen_du: np.ndarray     # (T, R) kWh per panel-unit
    gen_cu: np.ndarray     # (T,)
    price_day: np.ndarray  # (24,) $/kWh
    es_du: np.ndarray      # (R,)
    ed_du: np.ndarray      # (R,)
    omega_du: np.ndarray   # (R,)
    beta_du: np.ndarray    # (R,)
    es_cu: float
    ed_cu: float
    omega_cu: float
    beta_cu: float
    pinned: np.ndarray     # (I,) int8
    levels: np.ndarray     # (L,) ascending fractions of the feasible max
    max_load_du: np.ndarray  # (I,) binning scale per type
    max_load_cu: np.ndarray  # (I,)


def pack_env_arrays(env) -> EnvArrays:
    cfg = env.config
    r = cfg.du_count
    du_cfgs = cfg.du_configs
    max_du = np.asarray(cfg.max_loads, dtype=np.float64)
    return EnvArrays(
        loads=np.ascontiguousarray(env.loads_tri),
        gen_du=np.ascontiguousarray(env.gen[:, :r]),
        gen_cu=np.ascontiguousarray(env.gen[:, r]),
        price_day=np.ascontiguousarray(env.price_day),
        es_du=np.array([c.static_energy for c in du_cfgs]),
        ed_du=np.array([c.dynamic_coeff for c in du_cfgs]),
        omega_du=np.array([c.panel_size for c in du_cfgs]),
        beta_du=np.array([c.battery_capacity for c in du_cfgs]),
        es_cu=cfg.cu.static_energy,
        ed_cu=cfg.cu.dynamic_coeff,
        omega_cu=cfg.cu.panel_size,
        beta_cu=cfg.cu.battery_capacity,
        pinned=np.array([1 if ty.pinned_to_du else 0 for ty in cfg.types], dtype=np.int8),
        levels=np.asarray(cfg.dispatch_levels, dtype=np.float64),
        max_load_du=max_du,
        max_load_cu=max_du * r,
    )


# ---------------------------------------------------------------------------
# kernel implementations (numba-compatible subset: scalar loops only)
# ---------------------------------------------------------------------------


def _train_loop(algo, episodes, day_len,
                loads, gen_du, gen_cu, price_day,
                es_du, ed_du, omega_du, beta_du,
                es_cu, ed_cu, omega_cu, beta_cu,
                chain_len, pinned, levels,
                max_load_du, max_load_cu,
                battery_bins, load_bins,
                alpha, gamma, eps_start, eps_decay, eps_floor,
                window, psi,
                binit_du, binit_cu, reset_each_episode,
                b_du, b_cu,
                q_du, n_du, q_cu, n_cu,
                u_explore, u_action, curve):
    """One training run: algo 0 = Q-learning (immediate update), 1 = SARSA
    (update delayed one step so the actually-chosen next action is known).

    Mutates the q/visit tables and the battery state arrays in place and
    fills `curve` with per-episode total opex.
    """
    t_data = loads.shape[0]
    n_days = t_data // day_len
    n_dus = loads.shape[1]
    n_types = loads.shape[2]
    n_levels = levels.shape[0]

    n_nonpinned = 0
    for i in range(n_types):
        if pinned[i] == 0:
            n_nonpinned += 1
    a_du = n_levels
    for _ in range(n_nonpinned):
        a_du *= chain_len + 1
    a_cu = n_levels

    ring = np.zeros(window + 1)
    ring_len = 0
    ring_pos = 0

    s_du = np.zeros(n_dus, dtype=np.int64)
    act_du = np.zeros(n_dus, dtype=np.int64)
    e_du = np.zeros(n_dus)
    p_du = np.zeros(n_dus)
    k_split = np.zeros((n_dus, n_types), dtype=np.int64)
    prev_s_du = np.zeros(n_dus, dtype=np.int64)
    prev_a_du = np.zeros(n_dus, dtype=np.int64)
    prev_s_cu = 0
    prev_a_cu = 0
    prev_reward = 0.0
    have_prev = False

    gstep = 0
    for ep in range(episodes):
        day = ep % n_days
        if reset_each_episode:
            for r in range(n_dus):
                b_du[r] = binit_du[r]
            b_cu[0] = binit_cu
        ep_opex = 0.0
        for s in range(day_len):
            h = day * day_len + s
            price = price_day[h % 24]
            eps = eps_start - eps_decay * gstep
            if eps < eps_floor:
                eps = eps_floor

            # observe + epsilon-greedy select, DUs then CU
            for r in range(n_dus):
                cap = beta_du[r]
                if cap > 0.0:
                    bb = int(b_du[r] / cap * battery_bins)
                    if bb > battery_bins - 1:
                        bb = battery_bins - 1
                    if bb < 0:
                        bb = 0
                else:
                    bb = 0
                idx = bb
                for i in range(n_types):
                    ml = max_load_du[i]
                    if ml > 0.0:
                        lb = int(loads[h, r, i] / ml * load_bins)
                        if lb > load_bins - 1:
                            lb = load_bins - 1
                        if lb < 0:
                            lb = 0
                    else:
                        lb = 0
                    idx = idx * load_bins + lb
                idx = idx * day_len + s
                s_du[r] = idx
                if u_explore[gstep, r] < eps:
                    a = int(u_action[gstep, r] * a_du)
                    if a >= a_du:
                        a = a_du - 1
                else:
                    a = 0
                    bq = q_du[r, idx, 0]
                    for a2 in range(1, a_du):
                        if q_du[r, idx, a2] > bq:
                            bq = q_du[r, idx, a2]
                            a = a2
                act_du[r] = a

            if beta_cu > 0.0:
                bb = int(b_cu[0] / beta_cu * battery_bins)
                if bb > battery_bins - 1:
                    bb = battery_bins - 1
                if bb < 0:
                    bb = 0
            else:
                bb = 0
            idx = bb
            for i in range(n_types):
                tot = 0.0
                for r in range(n_dus):
                    tot += loads[h, r, i]
                ml = max_load_cu[i]
                if ml > 0.0:
                    lb = int(tot / ml * load_bins)
                    if lb > load_bins - 1:
                        lb = load_bins - 1
                    if lb < 0:
                        lb = 0
                else:
                    lb = 0
                idx = idx * load_bins + lb
            s_cu = idx * day_len + s
            if u_explore[gstep, n_dus] < eps:
                a_cu_act = int(u_action[gstep, n_dus] * a_cu)
                if a_cu_act >= a_cu:
                    a_cu_act = a_cu - 1
            else:
                a_cu_act = 0
                bq = q_cu[s_cu, 0]
                for a2 in range(1, a_cu):
                    if q_cu[s_cu, a2] > bq:
                        bq = q_cu[s_cu, a2]
                        a_cu_act = a2

            # SARSA: settle the previous transition now that (s', a') is known
            if algo == 1 and have_prev:
                for r in range(n_dus):
                    tgt = prev_reward + gamma * q_du[r, s_du[r], act_du[r]]
                    q_du[r, prev_s_du[r], prev_a_du[r]] += alpha * (tgt - q_du[r, prev_s_du[r], prev_a_du[r]])
                    n_du[r, prev_s_du[r], prev_a_du[r]] += 1
                tgt = prev_reward + gamma * q_cu[s_cu, a_cu_act]
                q_cu[prev_s_cu, prev_a_cu] += alpha * (tgt - q_cu[prev_s_cu, prev_a_cu])
                n_cu[prev_s_cu, prev_a_cu] += 1

            # transition: splits -> energies -> dispatch -> batteries
            for r in range(n_dus):
                rest = act_du[r] // n_levels
                for i in range(n_types - 1, -1, -1):
                    if pinned[i] != 0:
                        k_split[r, i] = chain_len
                    else:
                        k_split[r, i] = rest % (chain_len + 1)
                        rest //= chain_len + 1
                e = es_du[r]
                for i in range(n_types):
                    e += loads[h, r, i] * k_split[r, i] * ed_du[r]
                e_du[r] = e
            e_cu = es_cu
            for r in range(n_dus):
                for i in range(n_types):
                    e_cu += loads[h, r, i] * (chain_len - k_split[r, i]) * ed_cu

            for r in range(n_dus):
                lvl = act_du[r] % n_levels
                inflow = omega_du[r] * gen_du[h, r]
                avail = b_du[r] + inflow
                fmax = e_du[r] if e_du[r] < avail else avail
                p = levels[lvl] * fmax
                x = (b_du[r] - p) + inflow
                if x < 0.0:
                    x = 0.0
                if x > beta_du[r]:
                    x = beta_du[r]
                b_du[r] = x
                p_du[r] = p
            inflow = omega_cu * gen_cu[h]
            avail = b_cu[0] + inflow
            fmax = e_cu if e_cu < avail else avail
            p_cu = levels[a_cu_act] * fmax
            x = (b_cu[0] - p_cu) + inflow
            if x < 0.0:
                x = 0.0
            if x > beta_cu:
                x = beta_cu
            b_cu[0] = x

            resid = e_cu - p_cu
            for r in range(n_dus):
                resid += e_du[r] - p_du[r]
            opex = resid * price
            ep_opex += opex

            # shared reward over the trailing opex window, oldest first
            ring[ring_pos] = opex
            ring_pos = (ring_pos + 1) % (window + 1)
            if ring_len < window + 1:
                ring_len += 1
            start = (ring_pos - ring_len) % (window + 1)
            wsum = 0.0
            for j in range(ring_len):
                wsum += ring[(start + j) % (window + 1)]
            reward = -psi * wsum

            if algo == 0:
                # next decision context (battery resets apply at day breaks)
                if s + 1 < day_len:
                    h_next = h + 1
                    tod_next = s + 1
                    boundary = False
                else:
                    h_next = ((ep + 1) % n_days) * day_len
                    tod_next = 0
                    boundary = True
                for r in range(n_dus):
                    bnext = b_du[r]
                    if boundary and reset_each_episode:
                        bnext = binit_du[r]
                    cap = beta_du[r]
                    if cap > 0.0:
                        bb = int(bnext / cap * battery_bins)
                        if bb > battery_bins - 1:
                            bb = battery_bins - 1
                        if bb < 0:
                            bb = 0
                    else:
                        bb = 0
                    idx = bb
                    for i in range(n_types):
                        ml = max_load_du[i]
                        if ml > 0.0:
                            lb = int(loads[h_next, r, i] / ml * load_bins)
                            if lb > load_bins - 1:
                                lb = load_bins - 1
                            if lb < 0:
                                lb = 0
                        else:
                            lb = 0
                        idx = idx * load_bins + lb
                    idx = idx * day_len + tod_next
                    best = q_du[r, idx, 0]
                    for a2 in range(1, a_du):
                        if q_du[r, idx, a2] > best:
                            best = q_du[r, idx, a2]
                    tgt = reward + gamma * best
                    q_du[r, s_du[r], act_du[r]] += alpha * (tgt - q_du[r, s_du[r], act_du[r]])
                    n_du[r, s_du[r], act_du[r]] += 1
                bnext = b_cu[0]
                if boundary and reset_each_episode:
                    bnext = binit_cu
                if beta_cu > 0.0:
                    bb = int(bnext / beta_cu * battery_bins)
                    if bb > battery_bins - 1:
                        bb = battery_bins - 1
                    if bb < 0:
                        bb = 0
                else:
                    bb = 0
                idx = bb
                for i in range(n_types):
                    tot = 0.0
                    for r in range(n_dus):
                        tot += loads[h_next, r, i]
                    ml = max_load_cu[i]
                    if ml > 0.0:
                        lb = int(tot / ml * load_bins)
                        if lb > load_bins - 1:
                            lb = load_bins - 1
                        if lb < 0:
                            lb = 0
                    else:
                        lb = 0
                    idx = idx * load_bins + lb
                idx = idx * day_len + tod_next
                best = q_cu[idx, 0]
                for a2 in range(1, a_cu):
                    if q_cu[idx, a2] > best:
                        best = q_cu[idx, a2]
                tgt = reward + gamma * best
                q_cu[s_cu, a_cu_act] += alpha * (tgt - q_cu[s_cu, a_cu_act])
                n_cu[s_cu, a_cu_act] += 1
            else:
                for r in range(n_dus):
                    prev_s_du[r] = s_du[r]
                    prev_a_du[r] = act_du[r]
                prev_s_cu = s_cu
                prev_a_cu = a_cu_act
                prev_reward = reward
                have_prev = True

            gstep += 1
        curve[ep] = ep_opex


def _rollout_loop(policy_code, horizon, day_len,
                  loads, gen_du, gen_cu, price_day,
                  es_du, ed_du, omega_du, beta_du,
                  es_cu, ed_cu, omega_cu, beta_cu,
                  chain_len, pinned, levels,
                  max_load_du, max_load_cu,
                  battery_bins, load_bins,
                  b_du, b_cu,
                  q_du, q_cu,
                  ext_du, ext_cu,
                  e_out, p_out, over_out, b_out, opex_out,
                  act_du_out, act_cu_out):
    """Frozen-policy run: greedy over the tables (0), static D-RAN (1) or
    C-RAN (2) with maximum dispatch, or an explicit action sequence (3).

    Fills the per-step per-node outputs; node columns are DUs then CU.
    """
    n_dus = loads.shape[1]
    n_types = loads.shape[2]
    n_levels = levels.shape[0]

    n_nonpinned = 0
    for i in range(n_types):
        if pinned[i] == 0:
            n_nonpinned += 1
    a_du = n_levels
    for _ in range(n_nonpinned):
        a_du *= chain_len + 1
    a_cu = n_levels

    act_du = np.zeros(n_dus, dtype=np.int64)
    e_du = np.zeros(n_dus)
    k_split = np.zeros((n_dus, n_types), dtype=np.int64)

    # static policies: every non-pinned type keeps the same split point
    static_idx = 0
    if policy_code == 1:  # D-RAN: whole chain at the DU
        for _ in range(n_nonpinned):
            static_idx = static_idx * (chain_len + 1) + chain_len
    static_act = static_idx * n_levels + (n_levels - 1)

    for t in range(horizon):
        tod = t % day_len
        price = price_day[t % 24]

        for r in range(n_dus):
            if policy_code == 1 or policy_code == 2:
                a = static_act
            elif policy_code == 3:
                a = ext_du[t, r]
            else:
                cap = beta_du[r]
                if cap > 0.0:
                    bb = int(b_du[r] / cap * battery_bins)
                    if bb > battery_bins - 1:
                        bb = battery_bins - 1
                    if bb < 0:
                        bb = 0
                else:
                    bb = 0
                idx = bb
                for i in range(n_types):
                    ml = max_load_du[i]
                    if ml > 0.0:
                        lb = int(loads[t, r, i] / ml * load_bins)
                        if lb > load_bins - 1:
                            lb = load_bins - 1
                        if lb < 0:
                            lb = 0
                    else:
                        lb = 0
                    idx = idx * load_bins + lb
                idx = idx * day_len + tod
                a = 0
                bq = q_du[r, idx, 0]
                for a2 in range(1, a_du):
                    if q_du[r, idx, a2] > bq:
                        bq = q_du[r, idx, a2]
                        a = a2
            act_du[r] = a
            act_du_out[t, r] = a

        if policy_code == 1 or policy_code == 2:
            a_cu_act = n_levels - 1
        elif policy_code == 3:
            a_cu_act = ext_cu[t]
        else:
            if beta_cu > 0.0:
                bb = int(b_cu[0] / beta_cu * battery_bins)
                if bb > battery_bins - 1:
                    bb = battery_bins - 1
                if bb < 0:
                    bb = 0
            else:
                bb = 0
            idx = bb
            for i in range(n_types):
                tot = 0.0
                for r in range(n_dus):
                    tot += loads[t, r, i]
                ml = max_load_cu[i]
                if ml > 0.0:
                    lb = int(tot / ml * load_bins)
                    if lb > load_bins - 1:
                        lb = load_bins - 1
                    if lb < 0:
                        lb = 0
                else:
                    lb = 0
                idx = idx * load_bins + lb
            idx = idx * day_len + tod
            a_cu_act = 0
            bq = q_cu[idx, 0]
            for a2 in range(1, a_cu):
                if q_cu[idx, a2] > bq:
                    bq = q_cu[idx, a2]
                    a_cu_act = a2
        act_cu_out[t] = a_cu_act

        for r in range(n_dus):
            rest = act_du[r] // n_levels
            for i in range(n_types - 1, -1, -1):
                if pinned[i] != 0:
                    k_split[r, i] = chain_len
                else:
                    k_split[r, i] = rest % (chain_len + 1)
                    rest //= chain_len + 1
            e = es_du[r]
            for i in range(n_types):
                e += loads[t, r, i] * k_split[r, i] * ed_du[r]
            e_du[r] = e
        e_cu = es_cu
        for r in range(n_dus):
            for i in range(n_types):
                e_cu += loads[t, r, i] * (chain_len - k_split[r, i]) * ed_cu

        for r in range(n_dus):
            lvl = act_du[r] % n_levels
            inflow = omega_du[r] * gen_du[t, r]
            avail = b_du[r] + inflow
            fmax = e_du[r] if e_du[r] < avail else avail
            p = levels[lvl] * fmax
            x = (b_du[r] - p) + inflow
            if x < 0.0:
                x = 0.0
            if x > beta_du[r]:
                over_out[t, r] = x - beta_du[r]
                x = beta_du[r]
            else:
                over_out[t, r] = 0.0
            b_du[r] = x
            e_out[t, r] = e_du[r]
            p_out[t, r] = p
            b_out[t, r] = x
        inflow = omega_cu * gen_cu[t]
        avail = b_cu[0] + inflow
        fmax = e_cu if e_cu < avail else avail
        p_cu = levels[a_cu_act] * fmax
        x = (b_cu[0] - p_cu) + inflow
        if x < 0.0:
            x = 0.0
        if x > beta_cu:
            over_out[t, n_dus] = x - beta_cu
            x = beta_cu
        else:
            over_out[t, n_dus] = 0.0
        b_cu[0] = x
        e_out[t, n_dus] = e_cu
        p_out[t, n_dus] = p_cu
        b_out[t, n_dus] = x

        resid = e_cu - p_cu
        for r in range(n_dus):
            resid += e_out[t, r] - p_out[t, r]
        opex_out[t] = resid * price


# ---------------------------------------------------------------------------
# path selection
# ---------------------------------------------------------------------------

_PURE = {"train_loop": _train_loop, "rollout_loop": _rollout_loop}
_JITTED: dict | None = None


def _compile_jitted() -> dict:
    global _JITTED
    if _JITTED is None:
        from numba import njit

        _JITTED = {name: njit(cache=True)(fn) for name, fn in _PURE.items()}
    return _JITTED


_USING_NUMBA = False
if numba_requested():
    try:
        _active = _compile_jitted()
        _USING_NUMBA = True
    except ImportError:
        _active = _PURE
else:
    _active = _PURE

train_loop = _active["train_loop"]
rollout_loop = _active["rollout_loop"]


def using_numba() -> bool:
    return _USING_NUMBA


def pure_impls() -> dict:
    """Always the interpreted implementations, regardless of the env flag."""
    return dict(_PURE)


def jitted_impls() -> dict:
    """Compile (or fetch) the numba implementations, regardless of the flag."""
    return dict(_compile_jitted())
