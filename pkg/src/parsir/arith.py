"""Real and fixed-point arithmetic behind one interface.

The filter never touches raw words directly; it asks its arithmetic object to
quantize, propagate, take bearings and average.  ``FixedArithmetic`` is the
hardware-faithful path, ``RealArithmetic`` the float64 oracle.
"""
from __future__ import annotations

import math

import numpy as np

from . import fixedpoint as fx
from .rng import _as_signed, noise_units, uniform_signed_real

SECTOR_WIDTH = fx.ANGLE_FULL // 8  # 512 raw = pi/4


class RealArithmetic:
    fixed = False
    name = "real"

    def quantize(self, values):
        return np.asarray(values, dtype=np.float64)

    def to_real(self, values):
        return np.asarray(values, dtype=np.float64)

    def scalar(self, value):
        return float(value)

    def noise(self, words, distribution="uniform"):
        return noise_units(words, False, distribution)

    def propagate(self, coords, units, scale):
        return coords + units * scale

    def spread(self, center, words, half_width: float):
        """``center`` plus signed words scaled to [-half_width, half_width)."""
        return center + uniform_signed_real(words) * half_width

    def displacement(self, points, origin):
        return points - origin

    def azimuth_sector(self, d, heading_raw):
        """Sector 1..8 of each displacement, relative to the heading."""
        dx, dy = d[..., 0], d[..., 1]
        valid = (dx != 0) | (dy != 0)
        theta = np.mod(np.arctan2(dy, dx), 2 * math.pi)
        delta = np.mod(theta - fx.angle_to_real(heading_raw), 2 * math.pi)
        delta = np.where((delta == 0) | ~valid, 2 * math.pi, delta)
        return np.clip(np.ceil(delta * (4 / math.pi)), 1, 8).astype(np.int64)

    def elevation(self, d):
        """Elevation in radians, in [-pi/2, pi/2]."""
        return np.arctan2(d[..., 2], np.hypot(d[..., 0], d[..., 1]))

    def elevation_edges(self, edges):
        return np.asarray(edges, dtype=np.float64)

    def weights(self, likelihood, sectors, m):
        # previous weights are reset to 1/M every step
        return likelihood[sectors - 1] / m

    def mean(self, total, n):
        return total / n

    def sum(self, coords, axis):
        return coords.sum(axis=axis)


class FixedArithmetic:
    fixed = True
    name = "fixed"

    def quantize(self, values):
        return fx.fx_from_real(np.asarray(values, dtype=np.float64))

    def to_real(self, values):
        return fx.fx_to_real(np.asarray(values))

    def scalar(self, value):
        return fx.fx_from_real(float(value))

    def noise(self, words, distribution="uniform"):
        return noise_units(words, True, distribution)

    def propagate(self, coords, units, scale):
        return fx.fx_add(coords, fx.fx_mul(units, scale))

    def spread(self, center, words, half_width: float):
        # full 16-bit PRN times the Fx16 half-width, one rounding at the end
        prod = _as_signed(np.asarray(words, dtype=np.int64)) * fx.fx_from_real(half_width)
        return fx.fx_add(center, fx.saturate(fx._shift_round_even(prod, 15)))

    def displacement(self, points, origin):
        return fx.fx_sub(points, origin)

    def azimuth_sector(self, d, heading_raw):
        res = fx.cordic_vectoring(d[..., 1], d[..., 0])
        delta = fx.angle_sub(res.angle, heading_raw)
        delta = np.where((delta == 0) | ~res.valid, fx.ANGLE_FULL, delta)
        return (delta + SECTOR_WIDTH - 1) // SECTOR_WIDTH

    def elevation(self, d):
        """Signed Angle12 elevation (raw units, [-1024, 1024])."""
        horiz = fx.cordic_vectoring(d[..., 1], d[..., 0]).magnitude
        el = fx.cordic_vectoring(d[..., 2], horiz).angle
        return np.where(el >= fx.ANGLE_FULL // 2, el - fx.ANGLE_FULL, el)

    def elevation_edges(self, edges):
        return np.rint(np.asarray(edges) * (fx.ANGLE_FULL / (2 * math.pi))).astype(np.int64)

    def weights(self, likelihood, sectors, m):
        return weight_rom(likelihood)[sectors - 1]

    def mean(self, total, n):
        return fx.shift_div(total, n.bit_length() - 1)

    def sum(self, coords, axis):
        return coords.astype(np.int64).sum(axis=axis)


WEIGHT_BITS = 16
WEIGHT_MAX = (1 << WEIGHT_BITS) - 1


def weight_rom(likelihood: np.ndarray) -> np.ndarray:
    """Unsigned 16-bit weight words for one measurement word.

    Weights are un-normalized, so the table is scaled so its largest entry
    fills the word; an all-zero likelihood stays all zero.
    """
    peak = likelihood.max()
    if peak <= 0:
        return np.zeros(len(likelihood), dtype=np.int64)
    return np.rint(likelihood * (WEIGHT_MAX / peak)).astype(np.int64)


def make_arithmetic(mode: str):
    if mode == "fixed":
        return FixedArithmetic()
    if mode == "real":
        return RealArithmetic()
    raise ValueError(f"mode must be 'fixed' or 'real', got {mode!r}")
