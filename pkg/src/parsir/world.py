"""Stationary source, moving vehicle and the binary sector sensor.

The world is continuous (float64); only the filter sees quantized values.
Sensor draws come from their own LFSR stream so the filter's random numbers do
not depend on how many draws the sensor makes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fixedpoint as fx
from .arith import RealArithmetic
from .rng import Lfsr, uniform01
from .subfilter import SectorGeometry

_REAL = RealArithmetic()


class SourceReached(ValueError):
    """The vehicle sits exactly on the source; no bearing exists."""


@dataclass(frozen=True)
class SourceState:
    position: np.ndarray


@dataclass(frozen=True)
class VehicleState:
    position: np.ndarray
    heading: int  # Angle12 word

    @property
    def heading_rad(self) -> float:
        return fx.angle_to_real(self.heading)


@dataclass(frozen=True)
class SensorConfig:
    alpha: float = 0.8
    beta: float = 0.6
    geometry: SectorGeometry = SectorGeometry.planar()

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def sectors(self) -> int:
        return self.geometry.n_sectors


def true_bearing(source: SourceState, vehicle: VehicleState):
    """Azimuth in [0, 2*pi) from vehicle to source; (azimuth, elevation) in 3D."""
    d = np.asarray(source.position, dtype=float) - np.asarray(vehicle.position, dtype=float)
    if not np.any(d):
        raise SourceReached("vehicle position coincides with the source")
    az = math.atan2(d[1], d[0]) % (2 * math.pi)
    if len(d) == 2:
        return az
    return az, math.atan2(d[2], math.hypot(d[0], d[1]))


def source_sector(source: SourceState, vehicle: VehicleState, geometry: SectorGeometry) -> int:
    d = np.asarray(source.position, dtype=float) - np.asarray(vehicle.position, dtype=float)
    return int(geometry.sectors(_REAL, d[None, :], vehicle.heading)[0])


def sense(source: SourceState, vehicle: VehicleState, cfg: SensorConfig, rng: Lfsr) -> int:
    """One measurement word: bit j-1 set when sector j's sensor fires.

    The source's sector fires with probability alpha, every other sector with
    probability alpha * beta (clutter present and detected).
    """
    n = cfg.sectors
    j_star = source_sector(source, vehicle, cfg.geometry)
    u = uniform01(rng.next_block(n))
    p = np.full(n, cfg.alpha * cfg.beta)
    p[j_star - 1] = cfg.alpha
    bits = u < p
    return int(np.dot(bits.astype(np.int64), 1 << np.arange(n, dtype=np.int64)))


def advance_vehicle(vehicle: VehicleState, steering_sector: int, step_len: float,
                    geometry: SectorGeometry = SectorGeometry.planar()) -> VehicleState:
    """Turn to the centre of the steering sector and move ``step_len`` along it."""
    if not step_len > 0:
        raise ValueError("step_len must be positive")
    az_offset, elevation = geometry.center(steering_sector)
    heading = fx.angle_add(vehicle.heading, fx.angle_from_real(az_offset))
    az = fx.angle_to_real(heading)
    pos = np.asarray(vehicle.position, dtype=float)
    if geometry.dims == 2:
        move = np.array([math.cos(az), math.sin(az)])
    else:
        c = math.cos(elevation)
        move = np.array([c * math.cos(az), c * math.sin(az), math.sin(elevation)])
    return VehicleState(pos + step_len * move, heading)
