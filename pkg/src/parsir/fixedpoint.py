"""Bit-exact numeric kernel.

Positions live in a 16-bit signed Q9.6 word (``Fx16``), bearings in a 12-bit
unsigned angle word (``Angle12``, one turn = 4096).  Every function accepts
either Python ints or integer numpy arrays and returns the same kind, so the
filter can run the whole particle population through one call.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

FRAC_BITS = 6
WORD_BITS = 16
ONE = 1 << FRAC_BITS
RAW_MIN = -(1 << (WORD_BITS - 1))
RAW_MAX = (1 << (WORD_BITS - 1)) - 1
LSB = 1.0 / ONE

ANGLE_BITS = 12
ANGLE_FULL = 1 << ANGLE_BITS
ANGLE_MASK = ANGLE_FULL - 1

CORDIC_ITERATIONS = 16
# Internal CORDIC datapath: inputs are pre-shifted by this many bits and the
# angle accumulator carries this many bits per turn.
_CORDIC_PRESHIFT = 14
_CORDIC_ANGLE_BITS = 24
_CORDIC_TABLE = tuple(
    int(round(math.atan(2.0**-i) / (2 * math.pi) * (1 << _CORDIC_ANGLE_BITS)))
    for i in range(CORDIC_ITERATIONS)
)
_CORDIC_GAIN = math.prod(math.sqrt(1.0 + 2.0 ** (-2 * i)) for i in range(CORDIC_ITERATIONS))
# 1/K in Q1.14
INV_GAIN_Q14 = int(round((1 << 14) / _CORDIC_GAIN))


class DegenerateBearingError(ValueError):
    """Raised when a bearing is requested for a zero displacement."""


def saturate(raw):
    """Clamp raw words into the signed 16-bit range."""
    if isinstance(raw, np.ndarray):
        return np.clip(raw, RAW_MIN, RAW_MAX)
    return min(max(int(raw), RAW_MIN), RAW_MAX)


def fx_from_real(r):
    """Quantize reals to Q9.6 with round-half-even and saturation."""
    if isinstance(r, np.ndarray):
        scaled = np.clip(np.asarray(r, dtype=np.float64) * ONE, RAW_MIN, RAW_MAX)
        return np.rint(scaled).astype(np.int64)
    r = float(r)
    if not math.isfinite(r):
        raise ValueError(f"cannot quantize non-finite value {r!r}")
    scaled = r * ONE
    if scaled >= RAW_MAX:
        return RAW_MAX
    if scaled <= RAW_MIN:
        return RAW_MIN
    return int(round(scaled))  # round() is half-even


def fx_to_real(raw):
    if isinstance(raw, np.ndarray):
        return raw.astype(np.float64) / ONE
    return raw / ONE


def _shift_round_even(value, shift: int):
    # arithmetic right shift with round-half-even on the dropped bits
    if shift == 0:
        return value
    half = 1 << (shift - 1)
    mask = (1 << shift) - 1
    q = value >> shift
    rem = value & mask
    if isinstance(value, np.ndarray):
        up = (rem > half) | ((rem == half) & ((q & 1) == 1))
        return q + up.astype(q.dtype)
    if rem > half or (rem == half and q & 1):
        q += 1
    return q


def fx_add(a, b):
    return saturate(a + b)


def fx_sub(a, b):
    return saturate(a - b)


def fx_mul(a, b):
    """Q9.6 product: full-width multiply, round-half-even shift, saturate."""
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        prod = np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)
    else:
        prod = int(a) * int(b)
    return saturate(_shift_round_even(prod, FRAC_BITS))


def shift_div(total, log2_n: int):
    """Divide an accumulator by ``2**log2_n`` the way a hardware shifter does.

    Truncates toward negative infinity, then saturates to Fx16.
    """
    if log2_n < 0:
        raise ValueError("log2_n must be non-negative")
    if isinstance(total, np.ndarray):
        return saturate(total.astype(np.int64) >> log2_n)
    return saturate(int(total) >> log2_n)


# --- angles -----------------------------------------------------------------

def angle_from_real(theta):
    """Radians to Angle12, rounding to nearest and wrapping into [0, 4096)."""
    if isinstance(theta, np.ndarray):
        return np.rint(theta * (ANGLE_FULL / (2 * math.pi))).astype(np.int64) & ANGLE_MASK
    return int(round(theta * ANGLE_FULL / (2 * math.pi))) & ANGLE_MASK


def angle_to_real(raw):
    return raw * (2 * math.pi / ANGLE_FULL)


def angle_add(a, b):
    return (a + b) & ANGLE_MASK


def angle_sub(a, b):
    return (a - b) & ANGLE_MASK


class CordicResult(NamedTuple):
    angle: object  # Angle12 raw word(s)
    magnitude: object  # Fx16 raw word(s), gain compensated
    valid: object  # False where x == y == 0


def cordic_vectoring(y, x) -> CordicResult:
    """Four-quadrant arctangent and magnitude by vectoring-mode CORDIC.

    Vectorized over integer arrays.  Zero displacements yield angle 0 and
    ``valid`` False instead of raising, so callers can substitute.
    """
    scalar = not (isinstance(x, np.ndarray) or isinstance(y, np.ndarray))
    xs = np.atleast_1d(np.asarray(x, dtype=np.int64)).copy()
    ys = np.atleast_1d(np.asarray(y, dtype=np.int64)).copy()
    xs, ys = np.broadcast_arrays(xs, ys)
    xs = xs.copy() << _CORDIC_PRESHIFT
    ys = ys.copy() << _CORDIC_PRESHIFT
    valid = (xs != 0) | (ys != 0)

    # pre-rotate left half-plane by pi so the iterations only cover +-pi/2
    left = xs < 0
    xs = np.where(left, -xs, xs)
    ys = np.where(left, -ys, ys)
    z = np.where(left, 1 << (_CORDIC_ANGLE_BITS - 1), 0).astype(np.int64)

    for i, step in enumerate(_CORDIC_TABLE):
        d = ys >= 0
        x_new = np.where(d, xs + (ys >> i), xs - (ys >> i))
        ys = np.where(d, ys - (xs >> i), ys + (xs >> i))
        xs = x_new
        z = np.where(d, z + step, z - step)

    angle = _shift_round_even(z, _CORDIC_ANGLE_BITS - ANGLE_BITS) & ANGLE_MASK
    angle = np.where(valid, angle, 0)
    mag = (xs * INV_GAIN_Q14) >> 14
    mag = saturate(_shift_round_even(mag, _CORDIC_PRESHIFT))
    if scalar:
        return CordicResult(int(angle[0]), int(mag[0]), bool(valid[0]))
    return CordicResult(angle, mag, valid)


def cordic_atan2(y, x):
    """Angle12 bearing of the vector (x, y) in [0, 2*pi).

    Scalar inputs with x == y == 0 raise :class:`DegenerateBearingError`.
    """
    res = cordic_vectoring(y, x)
    if not isinstance(res.valid, np.ndarray) and not res.valid:
        raise DegenerateBearingError("bearing of a zero-length displacement")
    return res.angle
