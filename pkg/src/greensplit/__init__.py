"""greensplit: dynamic function splitting lab for solar-powered RANs."""

from .agents import (
    DiscretizationSpec,
    LearningParams,
    QTable,
    StateDiscretizer,
    q_update,
    sarsa_update,
    select_action,
    train,
)
from .baselines import PolicyKind, cran_policy, dran_policy
from .env import (
    BatteryState,
    EnvConfig,
    NodeAction,
    Observation,
    SimEnv,
    StepRecord,
    battery_step,
    feasible_dispatch_max,
    windowed_reward,
)
from .model import (
    DEFAULT_CU_CONFIG,
    DEFAULT_DU_CONFIG,
    DEFAULT_TARIFF,
    DEFAULT_TRAFFIC_TYPES,
    FunctionChain,
    LoadMatrix,
    NodeEnergyConfig,
    SplitVector,
    TariffSchedule,
    TrafficKind,
    TrafficType,
    cu_energy,
    du_energy,
    step_opex,
    validate_split_chain,
)
from .oracle import OracleInstance, OracleSolution, solve_oracle
from .scenario import ConfigError, ScenarioConfig, build_env, load_scenario
from .solar import SolarTrace, load_trace, synthetic_trace, write_trace
from .traffic import TrafficProfileConfig, deterministic_load, generate_load_matrix

__version__ = "0.1.0"
