"""Energy and cost model for a disaggregated RAN with on-site solar.

One central unit (CU) serves R distributed units (DUs).  The user-related
network functions form an ordered chain of length F, deployed bottom-up at
the DU; each (DU, traffic type) pair picks a split point k in [0, F] meaning
functions below k run at the DU and the remaining F - k at the CU.  Hourly
energy per node is a static term plus a load-proportional dynamic term, and
the operating cost of a timestep is the grid bill left after renewable
dispatch:

    E_du = E_S^du + sum_i U_i * k_i * E_D^du
    E_cu = E_S^cu + sum_r sum_i U_ri * (F - k_ri) * E_D^cu
    opex = [E_cu - p_cu + sum_r (E_du_r - p_du_r)] * price(t)

All energies are kWh per one-hour timestep; loads are normalized load-units.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TrafficKind",
    "TrafficType",
    "FunctionChain",
    "SplitVector",
    "NodeEnergyConfig",
    "TariffSchedule",
    "LoadMatrix",
    "validate_split_chain",
    "du_energy",
    "cu_energy",
    "step_opex",
    "DEFAULT_TRAFFIC_TYPES",
    "DEFAULT_CU_CONFIG",
    "DEFAULT_DU_CONFIG",
    "DEFAULT_TARIFF",
]


class TrafficKind(Enum):
    URLLC = "urllc"
    EMBB = "embb"


@dataclass(frozen=True)
class TrafficType:
    """A traffic class with its placement rule and relative load weight."""

    kind: TrafficKind
    pinned_to_du: bool
    load_scale: float

    def __post_init__(self):
        if self.load_scale < 0:
            raise ValueError(f"load_scale must be >= 0, got {self.load_scale}")

    @property
    def name(self) -> str:
        return self.kind.value


# URLLC stays at the DU for latency; eMBB carries ten times its load and is
# split-eligible.
DEFAULT_TRAFFIC_TYPES: tuple[TrafficType, ...] = (
    TrafficType(TrafficKind.URLLC, pinned_to_du=True, load_scale=1.0),
    TrafficType(TrafficKind.EMBB, pinned_to_du=False, load_scale=10.0),
)


@dataclass(frozen=True)
class FunctionChain:
    """Ordered chain of user-related functions, counted bottom-up at the DU."""

    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"chain needs at least one function, got {self.count}")


@dataclass(frozen=True)
class NodeEnergyConfig:
    """Static/dynamic energy coefficients plus panel and battery sizing.

    static_energy   kWh per timestep regardless of load (cooling, idle).
    dynamic_coeff   kWh per (load-unit x function x timestep).
    panel_size      solar panel size in panel-units.
    battery_capacity  usable storage in kWh.
    """

    static_energy: float
    dynamic_coeff: float
    panel_size: float
    battery_capacity: float

    def __post_init__(self):
        for fname in ("static_energy", "dynamic_coeff", "panel_size", "battery_capacity"):
            if getattr(self, fname) < 0:
                raise ValueError(f"{fname} must be >= 0, got {getattr(self, fname)}")


DEFAULT_CU_CONFIG = NodeEnergyConfig(10.0, 0.9, 500.0, 500.0)
DEFAULT_DU_CONFIG = NodeEnergyConfig(5.0, 1.0, 100.0, 100.0)

# Time-of-day bands for the default time-of-use tariff (hour-of-day, half-open).
NIGHT_BAND = (22, 6)
DAY_BAND = (6, 17)
PEAK_BAND = (17, 22)


@dataclass(frozen=True)
class TariffSchedule:
    """Grid price in $/kWh for each of the 24 hours of a day."""

    price_per_hour: tuple[float, ...]

    def __post_init__(self):
        if len(self.price_per_hour) != 24:
            raise ValueError(f"tariff needs exactly 24 hourly prices, got {len(self.price_per_hour)}")
        if any(p < 0 for p in self.price_per_hour):
            raise ValueError("tariff prices must be >= 0")

    @classmethod
    def from_bands(cls, night: float = 0.03, day: float = 0.07, peak: float = 0.11) -> "TariffSchedule":
        """Three-tier time-of-use tariff: night 22-06, day 06-17, peak 17-22."""
        prices = []
        for h in range(24):
            if DAY_BAND[0] <= h < DAY_BAND[1]:
                prices.append(day)
            elif PEAK_BAND[0] <= h < PEAK_BAND[1]:
                prices.append(peak)
            else:
                prices.append(night)
        return cls(tuple(prices))

    def price(self, t: int) -> float:
        return self.price_per_hour[t % 24]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.price_per_hour, dtype=np.float64)


DEFAULT_TARIFF = TariffSchedule.from_bands()


def validate_split_chain(a_vector: Sequence[int]) -> bool:
    """True iff the per-function placement vector is 1s followed by 0s.

    A 1 at position f means function f runs at the DU.  A valid split breaks
    the chain at most once: once a function moves to the CU, everything above
    it must too.
    """
    seen_zero = False
    for a in a_vector:
        if a not in (0, 1):
            raise ValueError(f"placement vector must be binary, got {a!r}")
        if a == 1 and seen_zero:
            return False
        if a == 0:
            seen_zero = True
    return True


class SplitVector:
    """Split points per (DU, traffic type), valid-by-construction.

    Storing the split point instead of the per-function bit-vector makes the
    single-break rule structural; the bit-vector form only exists at the
    validation boundary via :meth:`expand`.
    """

    def __init__(self, points, chain: FunctionChain):
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim != 2:
            raise ValueError(f"split points must be (du, type) shaped, got ndim={pts.ndim}")
        if pts.size and (pts.min() < 0 or pts.max() > chain.count):
            raise ValueError(f"split points must lie in [0, {chain.count}]")
        self.points = pts
        self.chain = chain

    @classmethod
    def uniform(cls, du_count: int, types: Sequence[TrafficType], chain: FunctionChain,
                point: int, pinned_point: int | None = None) -> "SplitVector":
        """Same split point everywhere; pinned types default to the full chain."""
        if pinned_point is None:
            pinned_point = chain.count
        pts = np.empty((du_count, len(types)), dtype=np.int64)
        for i, ty in enumerate(types):
            pts[:, i] = pinned_point if ty.pinned_to_du else point
        return cls(pts, chain)

    def expand(self, du: int, type_index: int) -> np.ndarray:
        """Binary placement vector (1 = at DU) for one (DU, type) pair."""
        k = self.points[du, type_index]
        a = np.zeros(self.chain.count, dtype=np.int64)
        a[:k] = 1
        return a

    @property
    def du_count(self) -> int:
        return self.points.shape[0]


@dataclass
class LoadMatrix:
    """Traffic load in load-units indexed by (DU, traffic type, timestep)."""

    values: np.ndarray
    types: tuple[TrafficType, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ValueError(f"load matrix must be (du, type, t) shaped, got ndim={self.values.ndim}")
        if self.values.shape[1] != len(self.types):
            raise ValueError("load matrix type axis does not match declared types")
        if self.values.size and self.values.min() < 0:
            raise ValueError("loads must be >= 0")

    @property
    def du_count(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> int:
        return self.values.shape[2]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("du,type,t,load\n")
            for r in range(self.values.shape[0]):
                for i, ty in enumerate(self.types):
                    for t in range(self.values.shape[2]):
                        fh.write(f"{r},{ty.name},{t},{float(self.values[r, i, t])!r}\n")

    @classmethod
    def from_csv(cls, path, types: Sequence[TrafficType]) -> "LoadMatrix":
        names = {ty.name: i for i, ty in enumerate(types)}
        rows = []
        with open(path) as fh:
            header = fh.readline().strip()
            if header != "du,type,t,load":
                raise ValueError(f"unexpected load CSV header: {header!r}")
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                du_s, name, t_s, load_s = line.split(",")
                if name not in names:
                    raise ValueError(f"row {lineno}: unknown traffic type {name!r}")
                rows.append((int(du_s), names[name], int(t_s), float(load_s)))
        if not rows:
            raise ValueError("load CSV has no data rows")
        du_count = max(r[0] for r in rows) + 1
        horizon = max(r[2] for r in rows) + 1
        values = np.zeros((du_count, len(types), horizon), dtype=np.float64)
        for du, i, t, load in rows:
            values[du, i, t] = load
        return cls(values, tuple(types))


def _check_split_point(k: int, chain: FunctionChain) -> int:
    k = int(k)
    if not 0 <= k <= chain.count:
        raise ValueError(f"split point {k} outside [0, {chain.count}]")
    return k


def du_energy(loads_per_type: Sequence[float], split_points: Sequence[int],
              cfg: NodeEnergyConfig, chain: FunctionChain) -> float:
    """Hourly energy of one DU: static term plus per-type dynamic load.

    Each traffic type contributes load * split_point * dynamic_coeff since
    exactly split_point functions of its chain run locally.
    """
    if len(loads_per_type) != len(split_points):
        raise ValueError("one split point per traffic type required")
    e = cfg.static_energy
    for load, k in zip(loads_per_type, split_points):
        k = _check_split_point(k, chain)
        if load < 0:
            raise ValueError(f"load must be >= 0, got {load}")
        e += load * k * cfg.dynamic_coeff
    return e


def cu_energy(loads, splits, cfg: NodeEnergyConfig, chain: FunctionChain) -> float:
    """Hourly energy of the CU over all DUs: it serves the chain remainder.

    `loads` is the (du, type) load slice for one timestep and `splits` the
    matching split points; every function not run at a DU lands here.
    """
    loads = np.asarray(loads, dtype=np.float64)
    points = splits.points if isinstance(splits, SplitVector) else np.asarray(splits, dtype=np.int64)
    if loads.shape != points.shape:
        raise ValueError(f"loads {loads.shape} and splits {points.shape} cover different (du, type) sets")
    e = cfg.static_energy
    for r in range(loads.shape[0]):
        for i in range(loads.shape[1]):
            k = _check_split_point(points[r, i], chain)
            if loads[r, i] < 0:
                raise ValueError(f"load must be >= 0, got {loads[r, i]}")
            e += loads[r, i] * (chain.count - k) * cfg.dynamic_coeff
    return e


def step_opex(cu_energy_kwh: float, cu_dispatch_kwh: float,
              per_du: Iterable[tuple[float, float]], price: float) -> float:
    """Grid bill of one timestep: unmet energy at every node times the price.

    Renewable dispatch p must satisfy 0 <= p <= E per node; violations are
    rejected rather than clamped.
    """

    def residual(e: float, p: float, node: str) -> float:
        if p < 0 or p > e:
            raise ValueError(f"dispatch {p} outside [0, {e}] at {node}")
        return e - p

    acc = residual(cu_energy_kwh, cu_dispatch_kwh, "cu")
    for r, (e, p) in enumerate(per_du):
        acc += residual(e, p, f"du{r}")
    return acc * price
