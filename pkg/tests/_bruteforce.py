"""Independent exhaustive evaluator used as the acceptance backstop.

Walks every joint (split, dispatch-level) sequence of a tiny instance by
simulating all of them in parallel with vectorized numpy; shares no code
with the production solver.  Element-wise arithmetic follows the simulator's
expression order exactly, so optima are comparable bit for bit.
"""

import itertools

import numpy as np


def joint_actions(chain_count, pinned, n_levels, du_count):
    """Every per-step joint action: per-DU (split points, level) plus CU level."""
    n_np = sum(1 for p in pinned if not p)
    per_du = [(ks, l)
              for ks in itertools.product(range(chain_count + 1), repeat=n_np)
              for l in range(n_levels)]
    return [(du_choice, cu_l)
            for du_choice in itertools.product(per_du, repeat=du_count)
            for cu_l in range(n_levels)]


def brute_force_opex(loads, gen_du, gen_cu, prices, chain_count, pinned, levels,
                     es_du, ed_du, omega_du, beta_du,
                     es_cu, ed_cu, omega_cu, beta_cu,
                     b0_du, b0_cu):
    """Total opex of every joint action sequence, shape (A ** T,).

    loads is (R, I, T); sequence j takes action digit t of j written in
    base A (most significant digit first).
    """
    du_count, n_types, t_len = loads.shape
    actions = joint_actions(chain_count, pinned, len(levels), du_count)
    a_count = len(actions)
    n_seq = a_count ** t_len
    nonpinned = [i for i in range(n_types) if not pinned[i]]

    seq = np.arange(n_seq, dtype=np.int64)
    b_du = np.tile(np.asarray(b0_du, dtype=np.float64), (n_seq, 1))
    b_cu = np.full(n_seq, float(b0_cu))
    total = np.zeros(n_seq)

    for t in range(t_len):
        digit = (seq // a_count ** (t_len - 1 - t)) % a_count

        # per-action energies and levels at this step
        e_du_a = np.zeros((a_count, du_count))
        e_cu_a = np.zeros(a_count)
        lvl_du_a = np.zeros((a_count, du_count), dtype=np.int64)
        lvl_cu_a = np.zeros(a_count, dtype=np.int64)
        for ai, (du_choice, cu_l) in enumerate(actions):
            e_cu = es_cu
            for r, (ks, lvl) in enumerate(du_choice):
                k = [chain_count] * n_types
                for j, i in enumerate(nonpinned):
                    k[i] = ks[j]
                e = es_du[r]
                for i in range(n_types):
                    e += loads[r, i, t] * k[i] * ed_du[r]
                e_du_a[ai, r] = e
                lvl_du_a[ai, r] = lvl
                for i in range(n_types):
                    e_cu += loads[r, i, t] * (chain_count - k[i]) * ed_cu
            e_cu_a[ai] = e_cu
            lvl_cu_a[ai] = cu_l

        du_contrib = np.zeros((n_seq, du_count))
        for r in range(du_count):
            e = e_du_a[digit, r]
            frac = np.asarray(levels)[lvl_du_a[digit, r]]
            inflow = omega_du[r] * gen_du[t, r]
            avail = b_du[:, r] + inflow
            fmax = np.minimum(e, avail)
            p = frac * fmax
            x = (b_du[:, r] - p) + inflow
            b_du[:, r] = np.clip(x, 0.0, beta_du[r])
            du_contrib[:, r] = e - p
        e = e_cu_a[digit]
        frac = np.asarray(levels)[lvl_cu_a[digit]]
        inflow = omega_cu * gen_cu[t]
        avail = b_cu + inflow
        fmax = np.minimum(e, avail)
        p = frac * fmax
        x = (b_cu - p) + inflow
        b_cu = np.clip(x, 0.0, beta_cu)

        resid = e - p
        for r in range(du_count):
            resid = resid + du_contrib[:, r]
        total = total + resid * prices[t]
    return total


def brute_force_instance(inst):
    """Adapter: run the exhaustive evaluator on an OracleInstance."""
    return brute_force_opex(
        inst.loads, inst.gen_du, inst.gen_cu, inst.prices,
        inst.chain.count, [ty.pinned_to_du for ty in inst.types],
        list(inst.dispatch_levels),
        [c.static_energy for c in inst.du_configs],
        [c.dynamic_coeff for c in inst.du_configs],
        [c.panel_size for c in inst.du_configs],
        [c.battery_capacity for c in inst.du_configs],
        inst.cu_config.static_energy, inst.cu_config.dynamic_coeff,
        inst.cu_config.panel_size, inst.cu_config.battery_capacity,
        list(inst.b0_du), inst.b0_cu)
