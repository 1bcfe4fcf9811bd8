import numpy as np
import pytest

from greensplit.env import EnvConfig, SimEnv
from greensplit.model import (
    FunctionChain,
    LoadMatrix,
    NodeEnergyConfig,
    TariffSchedule,
    TrafficKind,
    TrafficType,
)
from greensplit.solar import SolarTrace, synthetic_trace
from greensplit.traffic import TrafficProfileConfig, generate_load_matrix

TWO_TYPES = (
    TrafficType(TrafficKind.URLLC, pinned_to_du=True, load_scale=1.0),
    TrafficType(TrafficKind.EMBB, pinned_to_du=False, load_scale=10.0),
)


def small_env(du_count=2, horizon=48, chain=4, seed=7, noise=0.0, cloud=0.0,
              du_cfg=None, cu_cfg=None, intensity=1.0, levels=(0.0, 0.5, 1.0),
              initial_fraction=0.0, reward_window=48, types=TWO_TYPES,
              seasonal=0.0, peak_kwh=0.2):
    """Compact, fully deterministic environment for unit tests."""
    cfg = EnvConfig(
        du_count=du_count,
        chain=FunctionChain(chain),
        horizon=horizon,
        tariff=TariffSchedule.from_bands(),
        cu=cu_cfg or NodeEnergyConfig(10.0, 0.9, 500.0, 500.0),
        du=du_cfg or NodeEnergyConfig(5.0, 1.0, 100.0, 100.0),
        types=types,
        dispatch_levels=levels,
        reward_window=reward_window,
        initial_battery_fraction=initial_fraction,
        max_load_per_type=tuple(ty.load_scale * intensity for ty in types),
    )
    tcfg = TrafficProfileConfig(noise_sigma=noise, seasonal_amplitude=seasonal,
                                intensity=intensity, seed=seed)
    loads = generate_load_matrix(tcfg, horizon, du_count, types)
    trace = synthetic_trace(peak_kwh, 6, 18, horizon, seed=seed, cloud_sigma=cloud)
    return SimEnv(cfg, loads, trace)


def random_actions(env, rng):
    """One uniformly random valid action per agent."""
    from greensplit.env import NodeAction

    cfg = env.config
    f = cfg.chain.count
    n_levels = len(cfg.dispatch_levels)
    n_np = len(cfg.nonpinned_indices)
    actions = {}
    for node in env.node_ids:
        if node == "cu":
            actions[node] = NodeAction(int(rng.integers(n_levels)))
        else:
            splits = tuple(int(rng.integers(f + 1)) for _ in range(n_np))
            actions[node] = NodeAction(int(rng.integers(n_levels)), splits)
    return actions


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
