"""Spatiotemporal traffic generation.

Each DU gets a daily sinusoidal profile

    lambda(t) = (1/2^nu) * [1 + sin(pi*t/12 + phase)]^nu

whose phase is drawn per DU so different city zones peak at different hours.
nu sharpens the peak (default 7).  On top of the deterministic shape sit a
small Gaussian fluctuation and a multiplicative yearly envelope
1 - amplitude*(1 + cos(2*pi*d/365))/2 (summer ~1, winter ~1-amplitude); the
envelope is a documented stand-in, the source material fixes no formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import LoadMatrix, TrafficType
from .util import substream

PHASE_LOW_DEFAULT = 0.75 * math.pi
PHASE_HIGH_DEFAULT = 1.75 * math.pi

__all__ = [
    "TrafficProfileConfig",
    "deterministic_load",
    "seasonal_factor",
    "generate_load_matrix",
]


@dataclass(frozen=True)
class TrafficProfileConfig:
    """Knobs of the load generator; `intensity` is the global traffic rate
    multiplier (low/medium/high sweeps use 0.5/1.0/1.5)."""

    nu: float = 7.0
    phase_low: float = PHASE_LOW_DEFAULT
    phase_high: float = PHASE_HIGH_DEFAULT
    phases: tuple[float, ...] | None = None  # explicit per-DU phases override
    noise_sigma: float = 0.02
    seasonal_amplitude: float = 0.3
    intensity: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= self.seasonal_amplitude < 1:
            raise ValueError(f"seasonal_amplitude must be in [0, 1), got {self.seasonal_amplitude}")
        if self.intensity < 0:
            raise ValueError(f"intensity must be >= 0, got {self.intensity}")
        if not self.phase_low <= self.phase_high:
            raise ValueError("phase interval is empty")
        if self.phases is not None:
            for ph in self.phases:
                if not self.phase_low <= ph <= self.phase_high:
                    raise ValueError(f"phase {ph} outside [{self.phase_low}, {self.phase_high}]")


def deterministic_load(t: float, phase: float, nu: float) -> float:
    """Noise-free daily profile value at hour t, in [0, 1]."""
    if nu <= 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    return (1.0 + math.sin(math.pi * t / 12.0 + phase)) ** nu / 2.0 ** nu


def seasonal_factor(t: int, amplitude: float) -> float:
    """Yearly envelope at absolute hour t; day-of-year cycles through 365."""
    d = (t // 24) % 365
    return 1.0 - amplitude * (1.0 + math.cos(2.0 * math.pi * d / 365.0)) / 2.0


def draw_phases(cfg: TrafficProfileConfig, du_count: int) -> np.ndarray:
    if cfg.phases is not None:
        if len(cfg.phases) != du_count:
            raise ValueError(f"{du_count} DUs need {du_count} phases, got {len(cfg.phases)}")
        return np.asarray(cfg.phases, dtype=np.float64)
    rng = substream(cfg.seed, "traffic")
    return cfg.phase_low + (cfg.phase_high - cfg.phase_low) * rng.random(du_count)


def generate_load_matrix(cfg: TrafficProfileConfig, horizon: int, du_count: int,
                         types: Sequence[TrafficType]) -> LoadMatrix:
    """Load matrix U[r, i, t] over `horizon` hourly steps.

    U = intensity * load_scale_i * season(t) * max(0, profile(t, phase_r) + noise),
    reproducible for a fixed config seed.
    """
    if horizon < 1 or du_count < 1:
        raise ValueError("horizon and du_count must be >= 1")
    phases = draw_phases(cfg, du_count)  # consumes the traffic stream first
    rng = substream(cfg.seed, "traffic-noise")

    t = np.arange(horizon, dtype=np.float64)
    base = (1.0 + np.sin(math.pi * t[None, :] / 12.0 + phases[:, None])) ** cfg.nu / 2.0 ** cfg.nu
    if cfg.noise_sigma > 0:
        noise = rng.normal(0.0, cfg.noise_sigma, size=(du_count, len(types), horizon))
    else:
        noise = np.zeros((du_count, len(types), horizon))
    shape = np.clip(base[:, None, :] + noise, 0.0, None)

    days = (np.arange(horizon) // 24) % 365
    season = 1.0 - cfg.seasonal_amplitude * (1.0 + np.cos(2.0 * math.pi * days / 365.0)) / 2.0
    scales = np.array([ty.load_scale for ty in types], dtype=np.float64) * cfg.intensity
    values = scales[None, :, None] * season[None, None, :] * shape
    return LoadMatrix(values, tuple(types))
