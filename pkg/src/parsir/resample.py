"""Systematic resampling on un-normalized weights.

Two routes to the same outcome:

* :func:`systematic_resample` walks the threshold scan one weight at a time,
  emitting replicated and discarded indices in discovery order and counting
  the modeled hardware cycles.
* :func:`systematic_resample_bank` computes the same replicated indices for a
  whole filter bank with prefix sums and ``searchsorted``; this is what the
  filter runs every step.

Fixed mode works on integer weight words and a 16-bit uniform word, with all
comparisons carried out in integers scaled by 2**16 so nothing is rounded
except the step size (a truncating shift, as in hardware).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

U0_BITS = 16


class DegenerateWeightsError(ValueError):
    """All weights of a sub-filter are zero."""


@dataclass
class ResampleOutcome:
    """Replicated / discarded index streams (1-based) plus cycle accounting.

    ``counts[i]`` is the replication count of particle ``i + 1``.
    """

    ind_r: np.ndarray
    ind_d: np.ndarray
    counts: np.ndarray = field(default=None)
    loop_fetches: int = 0  # weights fetched inside the threshold loop
    flush_fetches: int = 0  # trailing particles scanned after the last threshold

    def __post_init__(self):
        if self.counts is None:
            self.counts = replication_counts(self.ind_r, len(self.ind_r))

    @property
    def m(self) -> int:
        return len(self.ind_r)

    @property
    def scan_cycles(self) -> int:
        # one fetch and one compare per weight
        return 2 * (self.loop_fetches + self.flush_fetches)

    @property
    def emit_cycles(self) -> int:
        return len(self.ind_r)

    @property
    def cycles(self) -> int:
        return self.scan_cycles + self.emit_cycles

    @classmethod
    def identity(cls, m: int) -> "ResampleOutcome":
        return cls(np.arange(1, m + 1), np.empty(0, dtype=np.int64),
                   np.ones(m, dtype=np.int64), loop_fetches=m)


def replication_counts(ind_r, m: int | None = None) -> np.ndarray:
    """Histogram of a 1-based replicated-index stream."""
    ind_r = np.asarray(ind_r, dtype=np.int64)
    if m is None:
        m = len(ind_r)
    return np.bincount(ind_r - 1, minlength=m)[:m]


def _log2_exact(m: int) -> int:
    if m < 1 or m & (m - 1):
        raise ValueError(f"particle count per sub-filter must be a power of two, got {m}")
    return m.bit_length() - 1


def step_size(sum_w, m: int, fixed: bool):
    """Threshold spacing A_w = sum_w / M (a right shift in fixed mode).

    Only fixed mode needs M to be a power of two.
    """
    if fixed:
        return int(sum_w) >> _log2_exact(m)
    if m < 1:
        raise ValueError("need at least one particle")
    return sum_w / m


def systematic_resample(weights, sum_w, u0, *, fixed: bool = False) -> ResampleOutcome:
    """Scan thresholds (u0 + j) * A_w against the running weight sum.

    ``u0`` is a real in [0, 1) in real mode and a 16-bit word in fixed mode.
    Raises :class:`DegenerateWeightsError` when ``sum_w`` is zero.
    """
    m = len(weights)
    a_w = step_size(sum_w, m, fixed)
    if not sum_w > 0 or a_w <= 0:
        raise DegenerateWeightsError("sub-filter weights sum to zero")
    if fixed:
        w = [int(x) << U0_BITS for x in weights]
        u_scale = int(u0) * a_w
        increment = a_w << U0_BITS
        s = 0
    else:
        w = [float(x) for x in weights]
        s = 0.0

    ind_r = []
    ind_d = []
    p = 0
    for i in range(m):
        thr = u_scale + i * increment if fixed else (u0 + i) * a_w
        # p == 0 forces the first fetch so a zero threshold never emits index 0
        while (s < thr or p == 0) and p < m:
            p += 1
            s += w[p - 1]
            if s < thr and p < m:
                ind_d.append(p)
        ind_r.append(p)  # p == m here covers thresholds the sum never reached
    loop_fetches = p
    ind_d.extend(range(p + 1, m + 1))
    return ResampleOutcome(np.asarray(ind_r, dtype=np.int64), np.asarray(ind_d, dtype=np.int64),
                           loop_fetches=loop_fetches, flush_fetches=m - p)


def systematic_resample_bank(weights: np.ndarray, sum_w: np.ndarray, u0: np.ndarray,
                             *, fixed: bool = False) -> np.ndarray:
    """Vectorized replicated indices for ``K`` sub-filters at once.

    ``weights`` is (K, M); returns (K, M) **0-based** replicated indices.
    Rows whose weight sum is zero come back filled with -1.
    """
    k, m = weights.shape
    j = np.arange(m)
    if fixed:
        prefix = np.cumsum(weights.astype(np.int64) << U0_BITS, axis=1)
        a_w = sum_w.astype(np.int64) >> _log2_exact(m)
        thr = u0.astype(np.int64)[:, None] * a_w[:, None] + j[None, :] * (a_w[:, None] << U0_BITS)
        bad = a_w <= 0
    else:
        prefix = np.cumsum(weights, axis=1)
        a_w = sum_w / m
        thr = (u0[:, None] + j[None, :]) * a_w[:, None]
        bad = ~(sum_w > 0)
    out = np.empty((k, m), dtype=np.int64)
    for row in range(k):
        if bad[row]:
            out[row] = -1
            continue
        out[row] = np.searchsorted(prefix[row], thr[row], side="left")
    np.minimum(out, m - 1, out=out)
    return out


def outcome_from_indices(ind_r0: np.ndarray) -> ResampleOutcome:
    """Build a :class:`ResampleOutcome` from 0-based replicated indices."""
    m = len(ind_r0)
    ind_r = np.asarray(ind_r0, dtype=np.int64) + 1
    counts = replication_counts(ind_r, m)
    last = int(ind_r[-1])
    return ResampleOutcome(ind_r, np.flatnonzero(counts == 0) + 1, counts,
                           loop_fetches=last, flush_fetches=m - last)
