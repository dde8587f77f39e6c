"""16-bit maximal-length LFSR and the uniform mappings the filter consumes.

One LFSR *step* clocks the shift register 16 times, i.e. it is the
leap-forward form of a Fibonacci LFSR with feedback polynomial
x^16 + x^15 + x^13 + x^4 + 1.  Since gcd(16, 65535) = 1 the word sequence
still visits every nonzero state once per 65535 steps, and successive words
are non-overlapping chunks of the m-sequence instead of one-bit shifts of
each other.

The single-bit recurrence is tabulated once; stepping is then an index
lookup, which keeps a 130k-word simulation run cheap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fixedpoint import _shift_round_even, fx_from_real, fx_mul

PERIOD = (1 << 16) - 1
TAPS = (16, 15, 13, 4)
STEP_SHIFTS = 16


def _feedback_bit(word: int, taps=TAPS) -> int:
    bit = 0
    for t in taps:
        bit ^= word >> (16 - t)
    return bit & 1


def shift_once(word: int, taps=TAPS) -> int:
    """One single-bit clock of the Fibonacci register (reference form)."""
    return (word >> 1) | (_feedback_bit(word, taps) << 15)


@lru_cache(maxsize=4)
def _tables(taps=TAPS):
    # bit sequence b_n with state_n = sum_i b_{n+i} << i
    bits = np.empty(PERIOD + 16, dtype=np.int64)
    word = 1
    for i in range(16):
        bits[i] = (word >> i) & 1
    n = 16
    while n < PERIOD + 16:
        word = shift_once(word, taps)
        bits[n] = word >> 15
        n += 1
    if word != shift_once_n(1, PERIOD, taps):
        raise AssertionError("feedback polynomial is not maximal length")
    idx = (np.arange(PERIOD) * STEP_SHIFTS) % PERIOD
    weights = 1 << np.arange(16, dtype=np.int64)
    windows = np.lib.stride_tricks.sliding_window_view(bits, 16)[:PERIOD]
    single = windows @ weights  # state after n single shifts, n = 0..PERIOD-1
    cycle = single[idx]  # state after j word-steps
    position = np.full(1 << 16, -1, dtype=np.int64)
    position[cycle] = np.arange(PERIOD)
    return cycle, position


def shift_once_n(word: int, n: int, taps=TAPS) -> int:
    for _ in range(n % PERIOD):
        word = shift_once(word, taps)
    return word


@dataclass(frozen=True)
class LfsrState:
    word: int
    taps: tuple = TAPS

    def __post_init__(self):
        if not 0 < self.word < (1 << 16):
            raise ValueError(f"LFSR word must be a nonzero 16-bit value, got {self.word:#x}")


def step_word(word: int, taps=TAPS) -> int:
    """Advance one word-step (16 single-bit clocks) without the lookup table."""
    for _ in range(STEP_SHIFTS):
        word = shift_once(word, taps)
    return word


def lfsr_next_block(state: LfsrState, k: int):
    """Return the next ``k`` output words and the advanced state."""
    if k <= 0:
        return np.empty(0, dtype=np.int64), state
    cycle, position = _tables(state.taps)
    start = position[state.word]
    words = cycle[(start + 1 + np.arange(k)) % PERIOD]
    return words, LfsrState(int(words[-1]), state.taps)


def seed_word(seed: int, stream: int = 0) -> int:
    """Map an integer seed (and stream id) onto a nonzero LFSR word."""
    mixed = (seed * 0x9E37 + stream * 0x7F4A + 0x1234) % PERIOD
    return mixed + 1


class Lfsr:
    """Mutable wrapper around :class:`LfsrState` for sequential consumers."""

    def __init__(self, seed: int = 0xACE1, taps=TAPS):
        self.state = LfsrState(seed, tuple(taps))

    def next_block(self, k: int) -> np.ndarray:
        words, self.state = lfsr_next_block(self.state, k)
        return words

    def next_word(self) -> int:
        return int(self.next_block(1)[0])


def split_streams(words: np.ndarray, k: int) -> np.ndarray:
    """Partition a block so row ``j`` holds the words at offsets j, k+j, 2k+j..."""
    words = np.asarray(words)
    if words.size % k:
        raise ValueError("block length must be a multiple of the stream count")
    return words.reshape(-1, k).T


# --- mappings ---------------------------------------------------------------

def uniform01(word):
    return word / 65536.0


def _as_signed(word):
    return np.where(word >= 0x8000, word - 0x10000, word) if isinstance(word, np.ndarray) \
        else (word - 0x10000 if word >= 0x8000 else word)


def uniform_signed(word):
    """Two's-complement word scaled by 2**-15, as a Q9.6 raw value."""
    return _shift_round_even(_as_signed(word), 15 - 6)


def uniform_signed_real(word):
    """Full-precision counterpart of :func:`uniform_signed` for real mode."""
    return _as_signed(word) / 32768.0


_SQRT3_2 = math.sqrt(3.0) / 2.0


def noise_units(words: np.ndarray, fixed: bool, distribution: str = "uniform"):
    """Map raw words to unit-scale noise samples.

    ``words`` has a trailing axis of length 1 (uniform) or 4 (gaussian); the
    gaussian variant is an Irwin-Hall sum of four signed uniforms rescaled to
    unit variance.
    """
    if distribution == "uniform":
        w = words[..., 0]
        return uniform_signed(w) if fixed else uniform_signed_real(w)
    if distribution == "gaussian":
        if fixed:
            return fx_mul(uniform_signed(words).sum(axis=-1), fx_from_real(_SQRT3_2))
        return uniform_signed_real(words).sum(axis=-1) * _SQRT3_2
    raise ValueError(f"unknown noise distribution {distribution!r}")


def words_per_draw(distribution: str) -> int:
    return {"uniform": 1, "gaussian": 4}[distribution]
