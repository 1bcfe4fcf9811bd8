"""Hourly renewable generation per panel-unit, from trace files or synthetic.

Trace files are CSV with header `hour,kwh_per_unit`, hour being the 0-based
absolute timestep.  One trace is typically shared by every node of a city;
per-node overrides happen at scenario level.  The synthetic generator is a
clear-sky half-sine arc with an optional lognormal cloud factor, used where
real irradiance exports are not available.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .util import substream

__all__ = ["SolarTrace", "load_trace", "write_trace", "synthetic_trace"]


@dataclass(frozen=True)
class SolarTrace:
    """kWh per panel-unit per hour at one site, long enough for the run."""

    site_name: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 1:
            raise ValueError("trace values must be one-dimensional")
        if self.values.size and self.values.min() < 0:
            raise ValueError("trace values must be >= 0")

    @property
    def horizon(self) -> int:
        return self.values.shape[0]


def load_trace(path, horizon: int, site_name: str | None = None) -> SolarTrace:
    """Read a generation trace of exactly `horizon` hourly values.

    Longer files are truncated with a warning; shorter files and malformed or
    negative rows are errors naming the offending row.
    """
    values = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "hour,kwh_per_unit":
            raise ValueError(f"{path}: unexpected trace header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path} row {lineno}: expected 'hour,kwh_per_unit', got {line!r}")
            try:
                hour = int(parts[0])
                kwh = float(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path} row {lineno}: malformed value ({exc})") from None
            if hour != len(values):
                raise ValueError(f"{path} row {lineno}: hours must be contiguous from 0, got {hour}")
            if kwh < 0:
                raise ValueError(f"{path} row {lineno}: negative generation {kwh}")
            values.append(kwh)
    if len(values) < horizon:
        raise ValueError(f"{path}: trace has {len(values)} rows, need {horizon}")
    if len(values) > horizon:
        warnings.warn(f"{path}: trace has {len(values)} rows, truncating to {horizon}")
        values = values[:horizon]
    if site_name is None:
        site_name = str(path)
    return SolarTrace(site_name, np.asarray(values))


def write_trace(trace: SolarTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("hour,kwh_per_unit\n")
        for hour, kwh in enumerate(trace.values):
            fh.write(f"{hour},{float(kwh)!r}\n")


def synthetic_trace(peak: float, sunrise: int, sunset: int, horizon: int,
                    seed: int = 0, cloud_sigma: float = 0.0,
                    site_name: str = "synthetic") -> SolarTrace:
    """Clear-sky half-sine arc between sunrise and sunset, scaled to `peak`.

    With cloud_sigma > 0 every hour is multiplied by a unit-median lognormal
    factor (clipped at 1 so clouds only attenuate), deterministic per seed.
    """
    if not 0 <= sunrise < sunset <= 24:
        raise ValueError(f"need 0 <= sunrise < sunset <= 24, got {sunrise}, {sunset}")
    if peak < 0:
        raise ValueError(f"peak must be >= 0, got {peak}")
    hours = np.arange(horizon)
    hod = hours % 24
    arc = np.sin(math.pi * (hod - sunrise) / (sunset - sunrise))
    values = np.where((hod >= sunrise) & (hod < sunset), peak * np.clip(arc, 0.0, None), 0.0)
    if cloud_sigma > 0:
        rng = substream(seed, "solar-clouds")
        clouds = np.minimum(1.0, np.exp(rng.normal(0.0, cloud_sigma, size=horizon)))
        values = values * clouds
    return SolarTrace(site_name, values)
